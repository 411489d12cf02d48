//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := primary ("^" exponent)?
//! exponent:= "-"? INT | "(" "-"? INT ")"
//! primary := NUMBER | "(" expr ")" | NAME | NAME "(" args ")" | NAME "_{" slots "}" "(" args ")"
//! ```
//!
//! Jet coordinates are written `u_xy`; the suffix is a concatenation of
//! independent-variable names. Function derivatives use 1-based argument
//! slots, `f_{4}(t, x, y, u)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{Atom, Coordinate, ExprError, Expression};

pub enum Symbol {
    Coord(Coordinate),
    Function { arity: usize },
}

pub trait SymbolTable {
    /// Resolves a bare name (possibly a jet such as `u_xy`).
    fn lookup(&self, name: &str, pos: usize) -> Result<Symbol, ExprError>;
}

pub fn parse_expression(text: &str, table: &dyn SymbolTable) -> Result<Expression, ExprError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        table,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    table: &'a dyn SymbolTable,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expression, ExprError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = &acc + &self.term()?;
            } else if self.eat(b'-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ExprError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = &acc * &self.unary()?;
            } else if self.peek() == Some(b'/') {
                let at = self.pos;
                self.pos += 1;
                let d = self.unary()?;
                acc = acc.checked_div(&d).ok_or(ExprError::Syntax {
                    pos: at,
                    msg: "division by zero".into(),
                })?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expression, ExprError> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ExprError> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let at = self.pos;
        let paren = self.eat(b'(');
        let neg = self.eat(b'-');
        self.skip_ws();
        let n = self.integer()?;
        if paren {
            self.expect(b')')?;
        }
        let n: i32 = n
            .try_into()
            .map_err(|_| self.err("exponent out of range"))?;
        base.pow(if neg { -n } else { n }).ok_or(ExprError::Syntax {
            pos: at,
            msg: "zero raised to a negative power".into(),
        })
    }

    fn integer(&mut self) -> Result<BigInt, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        Ok(s.parse().unwrap())
    }

    fn number(&mut self) -> Result<Expression, ExprError> {
        let int = self.integer()?;
        let mut value = BigRational::from_integer(int);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let mut scale = BigRational::one();
            let ten = BigRational::from_integer(10.into());
            let mut frac = BigRational::zero();
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                scale /= &ten;
                frac += &scale * BigRational::from_integer((self.src[self.pos] - b'0').into());
                self.pos += 1;
            }
            value += frac;
        }
        Ok(Expression::rational(value))
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8(self.src[start..self.pos].to_vec()).unwrap()
    }

    fn primary(&mut self) -> Result<Expression, ExprError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let name = self.ident();
                if name.ends_with('_') && self.src.get(self.pos) == Some(&b'{') {
                    let base = &name[..name.len() - 1];
                    self.pos += 1;
                    let mut slots = Vec::new();
                    loop {
                        self.skip_ws();
                        let s = self.integer()?;
                        let s: usize = s.try_into().map_err(|_| self.err("bad slot"))?;
                        if s == 0 {
                            return Err(self.err("argument slots are 1-based"));
                        }
                        slots.push((s - 1) as u8);
                        if !self.eat(b',') {
                            break;
                        }
                    }
                    self.expect(b'}')?;
                    return self.call(base, &slots, start);
                }
                if self.peek() == Some(b'(') {
                    return self.call(&name, &[], start);
                }
                match self.table.lookup(&name, start)? {
                    Symbol::Coord(c) => Ok(Expression::coord(&c)),
                    Symbol::Function { .. } => Err(ExprError::Syntax {
                        pos: self.pos,
                        msg: format!("function `{name}` used without arguments"),
                    }),
                }
            }
            Some(c) => Err(self.err(&format!("unexpected character `{}`", c as char))),
        }
    }

    fn call(&mut self, name: &str, slots: &[u8], start: usize) -> Result<Expression, ExprError> {
        let arity = match self.table.lookup(name, start)? {
            Symbol::Function { arity } => arity,
            Symbol::Coord(_) => {
                return Err(ExprError::Syntax {
                    pos: start,
                    msg: format!("`{name}` is not a function"),
                })
            }
        };
        self.expect(b'(')?;
        let mut args = Vec::new();
        if !self.eat(b')') {
            loop {
                args.push(self.expr()?);
                if self.eat(b')') {
                    break;
                }
                self.expect(b',')?;
            }
        }
        if args.len() != arity {
            return Err(ExprError::Arity {
                name: name.to_string(),
                expected: arity,
                got: args.len(),
            });
        }
        if slots.iter().any(|&s| s as usize >= arity) {
            return Err(ExprError::Syntax {
                pos: start,
                msg: format!("derivative slot out of range for `{name}`"),
            });
        }
        Ok(Expression::atom(Atom::new(name, slots, args)))
    }
}

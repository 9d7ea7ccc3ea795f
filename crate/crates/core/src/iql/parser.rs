use super::ast::{Attr, Expr, ListOperand, Literal, Operand};
use super::lexer::{tokenize, Tok, Token};
use super::{IqlError, SyntaxError};

const OPERAND: &[&str] = &["attribute", "number", "string", "true", "false"];

/// Parses a query. `not` binds tighter than comparisons, which bind
/// tighter than `and`, which binds tighter than `or`.
pub fn parse(text: &str) -> Result<Expr, IqlError> {
    let tokens = tokenize(text)?;
    if tokens.len() == 1 {
        return Err(IqlError::EmptyQuery);
    }
    let mut p = Parser { tokens, pos: 0 };
    let expr = p.or()?;
    p.expect_end()?;
    Ok(expr)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        let t = self.peek();
        SyntaxError {
            offset: t.offset,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        }
    }

    fn expect_end(&self) -> Result<(), SyntaxError> {
        if self.peek().tok == Tok::Eof {
            Ok(())
        } else {
            Err(self.error(&["and", "or", "end of input"]))
        }
    }

    fn or(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.and()?;
        while self.peek().tok == Tok::Or {
            self.bump();
            lhs = Expr::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        while self.peek().tok == Tok::And {
            self.bump();
            lhs = Expr::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().tok {
            Tok::Not => {
                self.bump();
                Ok(Expr::not(self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let e = self.or()?;
                if self.peek().tok != Tok::RParen {
                    return Err(self.error(&[")", "and", "or"]));
                }
                self.bump();
                Ok(e)
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let lhs_offset = self.peek().offset;
        let lhs = self.operand(&["not", "("])?;
        let expr = match self.peek().tok {
            Tok::Cmp(op) => {
                self.bump();
                Expr::Compare {
                    op,
                    lhs,
                    rhs: self.operand(&[])?,
                }
            }
            Tok::Contains => {
                self.bump();
                Expr::Contains {
                    lhs,
                    rhs: self.operand(&[])?,
                }
            }
            Tok::In => {
                self.bump();
                let rhs = match self.peek().tok.clone() {
                    Tok::LBracket => ListOperand::List(self.list()?),
                    Tok::Ident(name) => {
                        let offset = self.bump().offset;
                        ListOperand::Attr(Attr { name, offset })
                    }
                    _ => return Err(self.error(&["[", "attribute"])),
                };
                Expr::In { lhs, rhs }
            }
            _ => match lhs {
                Operand::Attr(a) => return Ok(Expr::Attr(a)),
                Operand::Lit(_) => {
                    return Err(self.error(&["==", "!=", "<", "<=", ">", ">=", "in", "contains"]))
                }
            },
        };
        let has_attr = match &expr {
            Expr::Compare { lhs, rhs, .. } | Expr::Contains { lhs, rhs } => {
                lhs.is_attr() || rhs.is_attr()
            }
            Expr::In { lhs, rhs } => lhs.is_attr() || matches!(rhs, ListOperand::Attr(_)),
            _ => true,
        };
        if !has_attr {
            return Err(SyntaxError {
                offset: lhs_offset,
                expected: vec!["attribute".into()],
                found: "a predicate over literals only".into(),
            });
        }
        Ok(expr)
    }

    fn operand(&mut self, also: &[&str]) -> Result<Operand, SyntaxError> {
        let t = self.peek().clone();
        let op = match t.tok {
            Tok::Ident(name) => Operand::Attr(Attr {
                name,
                offset: t.offset,
            }),
            Tok::Number(v) => Operand::Lit(Literal::Number(v)),
            Tok::Str(s) => Operand::Lit(Literal::Str(s)),
            Tok::True => Operand::Lit(Literal::Bool(true)),
            Tok::False => Operand::Lit(Literal::Bool(false)),
            _ => {
                let expected: Vec<&str> = OPERAND.iter().chain(also).copied().collect();
                return Err(self.error(&expected));
            }
        };
        self.bump();
        Ok(op)
    }

    fn list(&mut self) -> Result<Vec<Literal>, SyntaxError> {
        self.bump();
        let mut items = Vec::new();
        if self.peek().tok == Tok::RBracket {
            self.bump();
            return Ok(items);
        }
        loop {
            let lit = match self.peek().tok.clone() {
                Tok::Number(v) => Literal::Number(v),
                Tok::Str(s) => Literal::Str(s),
                Tok::True => Literal::Bool(true),
                Tok::False => Literal::Bool(false),
                _ => return Err(self.error(&["number", "string", "true", "false"])),
            };
            self.bump();
            items.push(lit);
            match self.peek().tok {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RBracket => {
                    self.bump();
                    return Ok(items);
                }
                _ => return Err(self.error(&[",", "]"])),
            }
        }
    }
}

use super::alphabet::is_identifier;
use super::{Alphabet, Formula};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    Implies,
    Next,
    Until,
    Release,
    Eventually,
    Always,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'!' | b'~' => Tok::Not,
            b'&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    i += 1;
                }
                Tok::And
            }
            b'|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    i += 1;
                }
                Tok::Or
            }
            b'-' => {
                if bytes.get(i + 1) != Some(&b'>') {
                    return Err(syntax(i, "expected `->`"));
                }
                i += 1;
                Tok::Implies
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                out.push((
                    start,
                    match word {
                        "true" => Tok::True,
                        "false" => Tok::False,
                        "X" => Tok::Next,
                        "U" => Tok::Until,
                        "R" => Tok::Release,
                        "F" => Tok::Eventually,
                        "G" => Tok::Always,
                        _ => Tok::Ident(word.to_string()),
                    },
                ));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, &format!("unexpected character `{ch}`")));
            }
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

fn syntax(pos: usize, msg: &str) -> Error {
    Error::Syntax { pos, msg: msg.to_string() }
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    resolve: &'a mut dyn FnMut(&str) -> Result<usize>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn implication(&mut self) -> Result<Formula> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut f = self.conjunction()?;
        while self.eat(&Tok::Or) {
            f = Formula::or(f, self.conjunction()?);
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut f = self.temporal()?;
        while self.eat(&Tok::And) {
            f = Formula::and(f, self.temporal()?);
        }
        Ok(f)
    }

    fn temporal(&mut self) -> Result<Formula> {
        let lhs = self.unary()?;
        if self.eat(&Tok::Until) {
            return Ok(Formula::until(lhs, self.temporal()?));
        }
        if self.eat(&Tok::Release) {
            return Ok(Formula::release(lhs, self.temporal()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        let at = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return Err(syntax(at, "unexpected end of input"));
        };
        self.pos += 1;
        match tok {
            Tok::Not => Ok(Formula::not(self.unary()?)),
            Tok::Next => Ok(Formula::next(self.unary()?)),
            Tok::Eventually => Ok(Formula::eventually(self.unary()?)),
            Tok::Always => Ok(Formula::always(self.unary()?)),
            Tok::True => Ok(Formula::True),
            Tok::False => Ok(Formula::False),
            Tok::Ident(name) => match (self.resolve)(&name) {
                Ok(i) => Ok(Formula::Prop(i)),
                Err(e) => Err(e),
            },
            Tok::LParen => {
                let f = self.implication()?;
                if !self.eat(&Tok::RParen) {
                    return Err(syntax(self.offset(), "expected `)`"));
                }
                Ok(f)
            }
            other => Err(syntax(at, &format!("unexpected token {other:?}"))),
        }
    }
}

fn run(text: &str, resolve: &mut dyn FnMut(&str) -> Result<usize>) -> Result<Formula> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len(), resolve };
    let f = p.implication()?;
    if p.pos != p.toks.len() {
        return Err(syntax(p.offset(), "unexpected trailing input"));
    }
    Ok(f)
}

/// Parses LTL text over a fixed alphabet.
pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Formula> {
    run(text, &mut |name| {
        alphabet
            .index_of(name)
            .ok_or_else(|| Error::UnknownProposition(name.to_string()))
    })
}

/// Parses LTL text, building the alphabet from propositions in order of first
/// appearance.
pub fn parse_inferring(text: &str) -> Result<(Formula, Alphabet)> {
    let mut names: Vec<String> = Vec::new();
    let f = run(text, &mut |name| {
        debug_assert!(is_identifier(name));
        if let Some(i) = names.iter().position(|n| n == name) {
            return Ok(i);
        }
        names.push(name.to_string());
        Ok(names.len() - 1)
    })?;
    Ok((f, Alphabet::new(names)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Formula::*;

    fn ab() -> Alphabet {
        Alphabet::new(["a", "b", "blue", "yellow"]).unwrap()
    }

    #[test]
    fn fig2_formula() {
        let f = parse("(F G a) | F b", &ab()).unwrap();
        assert_eq!(f, Formula::or(Formula::eventually(Formula::always(Prop(0))), Formula::eventually(Prop(1))));
    }

    #[test]
    fn unary_binds_tighter_than_until() {
        let f = parse("!blue U yellow", &ab()).unwrap();
        assert_eq!(f, Formula::until(Formula::not(Prop(2)), Prop(3)));
    }

    #[test]
    fn precedence_chain() {
        let f = parse("a U b U a & b | a -> b -> a", &ab()).unwrap();
        let u = Formula::until(Prop(0), Formula::until(Prop(1), Prop(0)));
        let lhs = Formula::or(Formula::and(u, Prop(1)), Prop(0));
        let expect = Formula::implies(lhs, Formula::implies(Prop(1), Prop(0)));
        assert_eq!(f, expect);
        assert_eq!(parse("F a", &ab()).unwrap(), Formula::eventually(Prop(0)));
        assert_eq!(parse("false R a", &ab()).unwrap(), Formula::release(False, Prop(0)));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(parse("a & ", &ab()).unwrap_err(), Error::Syntax { pos: 4, msg: "unexpected end of input".into() });
        assert!(matches!(parse("a $ b", &ab()), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(parse("(a", &ab()), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(parse("a b", &ab()), Err(Error::Syntax { pos: 2, .. })));
        assert_eq!(parse("F c", &ab()).unwrap_err(), Error::UnknownProposition("c".into()));
    }

    #[test]
    fn inferred_alphabet() {
        let (f, alpha) = parse_inferring("G (x -> F y) & G !z").unwrap();
        assert_eq!(alpha.names(), ["x", "y", "z"]);
        assert_eq!(f.num_props(), 3);
    }
}

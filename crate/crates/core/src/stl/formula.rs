use std::fmt;
use std::str::FromStr;

use super::StlError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparator {
    /// `s <= c`
    Le,
    /// `s >= c`
    Ge,
}

/// Discrete-time STL formula over named scalar channels.
///
/// Temporal bounds are step offsets relative to the evaluation time.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Pred {
        channel: String,
        cmp: Comparator,
        threshold: f64,
    },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Always {
        a: usize,
        b: usize,
        child: Box<Formula>,
    },
    Eventually {
        a: usize,
        b: usize,
        child: Box<Formula>,
    },
}

impl Formula {
    pub fn le(channel: &str, threshold: f64) -> Self {
        Formula::Pred {
            channel: channel.to_string(),
            cmp: Comparator::Le,
            threshold,
        }
    }

    pub fn ge(channel: &str, threshold: f64) -> Self {
        Formula::Pred {
            channel: channel.to_string(),
            cmp: Comparator::Ge,
            threshold,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn always(a: usize, b: usize, child: Formula) -> Result<Self, StlError> {
        check_bounds(a, b)?;
        Ok(Formula::Always {
            a,
            b,
            child: Box::new(child),
        })
    }

    pub fn eventually(a: usize, b: usize, child: Formula) -> Result<Self, StlError> {
        check_bounds(a, b)?;
        Ok(Formula::Eventually {
            a,
            b,
            child: Box::new(child),
        })
    }

    /// Number of steps past the evaluation time the formula looks at.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::Pred { .. } => 0,
            Formula::Not(c) => c.horizon(),
            Formula::And(l, r) | Formula::Or(l, r) => l.horizon().max(r.horizon()),
            Formula::Always { b, child, .. } | Formula::Eventually { b, child, .. } => {
                b + child.horizon()
            }
        }
    }

    /// Nesting depth counted in operator nodes (predicates have depth 0).
    pub fn depth(&self) -> usize {
        match self {
            Formula::Pred { .. } => 0,
            Formula::Not(c) => 1 + c.depth(),
            Formula::And(l, r) | Formula::Or(l, r) => 1 + l.depth().max(r.depth()),
            Formula::Always { child, .. } | Formula::Eventually { child, .. } => 1 + child.depth(),
        }
    }

    /// Channel names referenced anywhere in the tree.
    pub fn channels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_channels(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_channels<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::Pred { channel, .. } => out.push(channel),
            Formula::Not(c) => c.collect_channels(out),
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.collect_channels(out);
                r.collect_channels(out);
            }
            Formula::Always { child, .. } | Formula::Eventually { child, .. } => {
                child.collect_channels(out)
            }
        }
    }
}

fn check_bounds(a: usize, b: usize) -> Result<(), StlError> {
    if a > b {
        return Err(StlError::Malformed(format!("temporal bounds [{a}, {b}] with a > b")));
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Pred {
                channel,
                cmp,
                threshold,
            } => {
                let op = match cmp {
                    Comparator::Le => "<=",
                    Comparator::Ge => ">=",
                };
                write!(f, "({op} {channel} {threshold:?})")
            }
            Formula::Not(c) => write!(f, "(not {c})"),
            Formula::And(l, r) => write!(f, "(and {l} {r})"),
            Formula::Or(l, r) => write!(f, "(or {l} {r})"),
            Formula::Always { a, b, child } => write!(f, "(always {a} {b} {child})"),
            Formula::Eventually { a, b, child } => write!(f, "(eventually {a} {b} {child})"),
        }
    }
}

impl FromStr for Formula {
    type Err = StlError;

    /// Parses prefix notation such as
    /// `(always 0 7 (and (<= v_sag 1.0) (>= v_sag -0.3)))`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tokens = tokenize(s);
        let mut pos = 0;
        let f = parse(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(StlError::Parse(format!("trailing input at token {pos}")));
        }
        Ok(f)
    }
}

fn tokenize(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' | ')' => {
                if let Some(st) = start.take() {
                    out.push(&s[st..i]);
                }
                out.push(&s[i..i + 1]);
            }
            c if c.is_whitespace() => {
                if let Some(st) = start.take() {
                    out.push(&s[st..i]);
                }
            }
            _ => {
                if start.is_none() {
                    start = Some(i);
                }
            }
        }
    }
    if let Some(st) = start {
        out.push(&s[st..]);
    }
    out
}

fn next<'a>(tokens: &[&'a str], pos: &mut usize) -> Result<&'a str, StlError> {
    let t = tokens
        .get(*pos)
        .ok_or_else(|| StlError::Parse("unexpected end of input".into()))?;
    *pos += 1;
    Ok(t)
}

fn expect(tokens: &[&str], pos: &mut usize, want: &str) -> Result<(), StlError> {
    let t = next(tokens, pos)?;
    if t != want {
        return Err(StlError::Parse(format!("expected '{want}', found '{t}'")));
    }
    Ok(())
}

fn number<T: FromStr>(tokens: &[&str], pos: &mut usize) -> Result<T, StlError> {
    let t = next(tokens, pos)?;
    t.parse()
        .map_err(|_| StlError::Parse(format!("invalid number '{t}'")))
}

fn parse(tokens: &[&str], pos: &mut usize) -> Result<Formula, StlError> {
    expect(tokens, pos, "(")?;
    let head = next(tokens, pos)?;
    let f = match head {
        "<=" | ">=" => {
            let channel = next(tokens, pos)?;
            if channel == "(" || channel == ")" {
                return Err(StlError::Parse("expected a channel name".into()));
            }
            let threshold: f64 = number(tokens, pos)?;
            Formula::Pred {
                channel: channel.to_string(),
                cmp: if head == "<=" {
                    Comparator::Le
                } else {
                    Comparator::Ge
                },
                threshold,
            }
        }
        "not" => Formula::not(parse(tokens, pos)?),
        "and" | "or" => {
            let l = parse(tokens, pos)?;
            let r = parse(tokens, pos)?;
            if head == "and" {
                Formula::and(l, r)
            } else {
                Formula::or(l, r)
            }
        }
        "always" | "eventually" => {
            let a: usize = number(tokens, pos)?;
            let b: usize = number(tokens, pos)?;
            let child = parse(tokens, pos)?;
            if head == "always" {
                Formula::always(a, b, child)?
            } else {
                Formula::eventually(a, b, child)?
            }
        }
        other => return Err(StlError::Parse(format!("unknown operator '{other}'"))),
    };
    expect(tokens, pos, ")")?;
    Ok(f)
}

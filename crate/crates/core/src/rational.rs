//! Exact rational parsing for parameters given as `p/q` or finite decimals.

use num_rational::Ratio;

pub type Q = Ratio<i64>;

/// Parses `"p/q"`, an integer, or a finite decimal such as `"0.3"` or
/// `"-1.25"`. Returns `None` for anything else (exponents, `sqrt`, ...).
pub fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().ok()?;
        let d: i64 = den.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Q::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() || !body.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return None;
    }
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if frac_part.contains('.') || frac_part.len() > 17 {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let n: i64 = if digits.is_empty() { return None } else { digits.parse().ok()? };
    let d = 10i64.checked_pow(frac_part.len() as u32)?;
    let q = Q::new(n, d);
    Some(if neg { -q } else { q })
}

/// A real parameter that remembers whether it was given exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Real {
    Exact(Q),
    Float(f64),
}

impl Real {
    pub fn value(&self) -> f64 {
        match *self {
            Real::Exact(q) => to_f64(q),
            Real::Float(v) => v,
        }
    }

    pub fn exact(&self) -> Option<Q> {
        match *self {
            Real::Exact(q) => Some(q),
            Real::Float(_) => None,
        }
    }

    pub fn parse(s: &str) -> Option<Real> {
        parse_real(s).map(|(v, q)| match q {
            Some(q) => Real::Exact(q),
            None => Real::Float(v),
        })
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real::Float(v)
    }
}

impl From<Q> for Real {
    fn from(q: Q) -> Self {
        Real::Exact(q)
    }
}

impl std::fmt::Display for Real {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Real::Exact(q) if *q.denom() == 1 => write!(f, "{}", q.numer()),
            Real::Exact(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            Real::Float(v) => write!(f, "{v:?}"),
        }
    }
}

pub fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Parses either an exact rational or a general float.
pub fn parse_real(s: &str) -> Option<(f64, Option<Q>)> {
    if let Some(q) = parse_rational(s) {
        return Some((to_f64(q), Some(q)));
    }
    s.trim().parse::<f64>().ok().map(|v| (v, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_forms() {
        assert_eq!(parse_rational("1/9"), Some(Q::new(1, 9)));
        assert_eq!(parse_rational("0.3"), Some(Q::new(3, 10)));
        assert_eq!(parse_rational("-1.25"), Some(Q::new(-5, 4)));
        assert_eq!(parse_rational("2"), Some(Q::from_integer(2)));
        assert_eq!(parse_rational("4/8"), Some(Q::new(1, 2)));
        assert_eq!(parse_rational("1e-3"), None);
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("."), None);
    }

    #[test]
    fn real_fallback() {
        let (v, q) = parse_real("1.5e-1").unwrap();
        assert!((v - 0.15).abs() < 1e-15);
        assert!(q.is_none());
    }
}

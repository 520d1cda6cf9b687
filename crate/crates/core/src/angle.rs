//! 4-adic classification of rational angles for `C(1/4) + N_theta`.

use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// `m / 4^j mod 4` where `4^j` is the largest power of 4 dividing `m`.
pub fn star(m: u64) -> Result<u8> {
    if m == 0 {
        return domain("star(0) is undefined");
    }
    let mut m = m;
    while m % 4 == 0 {
        m /= 4;
    }
    Ok((m % 4) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleKind {
    Irrational,
    Small,
    Big,
}

impl fmt::Display for AngleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AngleKind::Irrational => "irrational",
            AngleKind::Small => "small",
            AngleKind::Big => "big",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleClass {
    pub kind: AngleKind,
    /// Reduced tangent `p/q`; zero for irrational angles.
    pub p: u64,
    pub q: u64,
    pub p_star: u8,
    pub q_star: u8,
}

/// Classifies `tan theta = p/q` after reducing to lowest terms. Signs are
/// dropped.
pub fn classify_angle(p: i64, q: i64) -> Result<AngleClass> {
    let (p, q) = (p.unsigned_abs(), q.unsigned_abs());
    if p == 0 || q == 0 {
        return domain("classify_angle needs nonzero p and q");
    }
    let g = p.gcd(&q);
    let (p, q) = (p / g, q / g);
    let (ps, qs) = (star(p)?, star(q)?);
    let kind = if ps % 2 == 1 && qs % 2 == 1 { AngleKind::Small } else { AngleKind::Big };
    Ok(AngleClass { kind, p, q, p_star: ps, q_star: qs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaSpec {
    Rational { p: i64, q: i64 },
    Irrational { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: AngleKind,
    pub measure_zero: bool,
    pub dim_two: bool,
    pub dim_below_two: bool,
    pub interior_nonempty: bool,
}

impl Prediction {
    pub fn summary(&self) -> &'static str {
        match self.class {
            AngleKind::Irrational => "measure-zero,dim=2",
            AngleKind::Small => "dim<2",
            AngleKind::Big => "interior-nonempty",
        }
    }
}

/// Predicted behaviour of `C(1/4) + N_theta`.
pub fn predict_sumset(theta: ThetaSpec) -> Result<Prediction> {
    let class = match theta {
        ThetaSpec::Irrational { .. } => AngleKind::Irrational,
        ThetaSpec::Rational { p, q } => classify_angle(p, q)?.kind,
    };
    Ok(match class {
        AngleKind::Irrational => Prediction {
            class,
            measure_zero: true,
            dim_two: true,
            dim_below_two: false,
            interior_nonempty: false,
        },
        AngleKind::Small => Prediction {
            class,
            measure_zero: true,
            dim_two: false,
            dim_below_two: true,
            interior_nonempty: false,
        },
        AngleKind::Big => Prediction {
            class,
            measure_zero: false,
            dim_two: true,
            dim_below_two: false,
            interior_nonempty: true,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stars() {
        assert_eq!(star(6).unwrap(), 2);
        assert_eq!(star(112).unwrap(), 3);
        assert_eq!(star(4).unwrap(), 1);
        assert!(star(0).is_err());
    }

    #[test]
    fn classes() {
        assert_eq!(classify_angle(1, 1).unwrap().kind, AngleKind::Small);
        assert_eq!(classify_angle(1, 2).unwrap().kind, AngleKind::Big);
        let c = classify_angle(7, 112).unwrap();
        assert_eq!((c.p, c.q, c.p_star, c.q_star, c.kind), (1, 16, 1, 1, AngleKind::Small));
        assert_eq!(classify_angle(-1, 2).unwrap(), classify_angle(1, 2).unwrap());
    }

    #[test]
    fn predictions() {
        let irr = predict_sumset(ThetaSpec::Irrational { value: 2f64.sqrt().atan() }).unwrap();
        assert!(irr.measure_zero && irr.dim_two);
        assert!(predict_sumset(ThetaSpec::Rational { p: 1, q: 1 }).unwrap().dim_below_two);
        assert!(predict_sumset(ThetaSpec::Rational { p: 1, q: 2 }).unwrap().interior_nonempty);
    }
}

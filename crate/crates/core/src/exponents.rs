//! The phase diagram of `P(X_n >= y n^beta) ~ exp(-n^zeta)`: regions I to V,
//! their exponents, and the exponent of plain i.i.d. sums.

use crate::num::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    I,
    II,
    III,
    IV,
    V,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::IV => "IV",
            Region::V => "V",
        };
        f.write_str(s)
    }
}

impl Region {
    pub const ALL: [Region; 5] = [Region::I, Region::II, Region::III, Region::IV, Region::V];

    /// `zeta` of this region's formula, evaluated anywhere.
    pub fn zeta<T: Scalar>(self, alpha: T, beta: T, d: usize) -> T {
        let one = T::one();
        let two = T::lit(2.0);
        let d = T::from_usize_lossy(d);
        match self {
            Region::I => two * beta - one,
            Region::II => beta * alpha / (alpha + one),
            Region::III => d * beta / (d + two),
            Region::IV => (d + two * alpha * (beta - one)) / (d + two),
            Region::V => alpha * (beta - one),
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            Region::I => "2*beta - 1",
            Region::II => "beta*alpha/(alpha + 1)",
            Region::III => "d*beta/(d + 2)",
            Region::IV => "(d + 2*alpha*(beta - 1))/(d + 2)",
            Region::V => "alpha*(beta - 1)",
        }
    }
}

/// Region label of a classified point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionTag {
    I,
    II,
    III,
    IV,
    V,
    /// On a boundary that no region owns; see `adjacent`.
    #[serde(rename = "boundary")]
    Boundary,
    #[serde(rename = "out-of-scope")]
    OutOfScope,
}

impl From<Region> for RegionTag {
    fn from(r: Region) -> Self {
        match r {
            Region::I => RegionTag::I,
            Region::II => RegionTag::II,
            Region::III => RegionTag::III,
            Region::IV => RegionTag::IV,
            Region::V => RegionTag::V,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint<T> {
    pub alpha: T,
    pub beta: T,
    pub d: usize,
}

impl<T: Scalar> PhasePoint<T> {
    pub fn new(alpha: T, beta: T, d: usize) -> Self {
        Self { alpha, beta, d }
    }

    /// `(alpha + 1) / (alpha + 2)`.
    pub fn beta_i_ii(&self) -> T {
        (self.alpha + T::one()) / (self.alpha + T::lit(2.0))
    }

    /// `(d/2 + 1) / (d/2 + 2)`.
    pub fn beta_i_iii(&self) -> T {
        let h = T::from_usize_lossy(self.d) / T::lit(2.0);
        (h + T::one()) / (h + T::lit(2.0))
    }

    /// `1 + 1/alpha`.
    pub fn beta_v(&self) -> T {
        T::one() + T::one() / self.alpha
    }

    pub fn half_d(&self) -> T {
        T::from_usize_lossy(self.d) / T::lit(2.0)
    }

    pub fn out_of_scope_reason(&self) -> Option<&'static str> {
        if self.d < 3 {
            Some("d < 3")
        } else if !(self.alpha > T::one()) || !self.alpha.is_finite() {
            Some("alpha must be finite and > 1")
        } else if !(self.beta > T::lit(0.5)) || !self.beta.is_finite() {
            Some("beta must be finite and > 1/2")
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentResult<T> {
    pub region: RegionTag,
    /// Both adjacent regions when the point sits on a region boundary.
    pub adjacent: Vec<Region>,
    pub zeta: Option<T>,
    /// Whether the bound is only claimed for `y > y0`.
    pub needs_y0: bool,
    pub formula: String,
    pub notes: Vec<String>,
}

fn near<T: Scalar>(a: T, b: T) -> bool {
    (a - b).abs() <= T::epsilon() * T::lit(16.0) * (T::one() + b.abs())
}

/// Classifies `(alpha, beta, d)`. A boundary belongs to the region above it
/// in `beta`, except that Region III keeps `beta = 1`.
pub fn classify<T: Scalar>(p: PhasePoint<T>) -> ExponentResult<T> {
    if let Some(reason) = p.out_of_scope_reason() {
        return ExponentResult {
            region: RegionTag::OutOfScope,
            adjacent: vec![],
            zeta: None,
            needs_y0: false,
            formula: String::new(),
            notes: vec![reason.to_string()],
        };
    }
    let (alpha, beta, d) = (p.alpha, p.beta, p.d);
    let one = T::one();
    let b1 = p.beta_i_ii();
    let b3 = p.beta_i_iii();
    let b5 = p.beta_v();
    let half = p.half_d();
    let critical = near(alpha, half);
    let below = alpha < half && !critical;

    let mut adjacent = Vec::new();
    let mut notes = Vec::new();
    let mut needs_y0 = false;
    let low_edge = if below { b1 } else { b3 };
    let region: Option<Region> = if beta < low_edge && !near(beta, low_edge) {
        needs_y0 = true;
        Some(Region::I)
    } else if near(beta, b5) || beta > b5 {
        if near(beta, b5) {
            adjacent = if below { vec![Region::II, Region::V] } else { vec![Region::IV, Region::V] };
        }
        if !below {
            notes.push("Region V beyond 1 + 1/alpha for alpha >= d/2 is extrapolated".into());
        }
        Some(Region::V)
    } else if below {
        if near(beta, b1) {
            adjacent = vec![Region::I, Region::II];
            needs_y0 = true;
        }
        Some(Region::II)
    } else if beta < one || near(beta, one) {
        if near(beta, b3) {
            adjacent = vec![Region::I, Region::III];
            needs_y0 = true;
        } else if near(beta, one) {
            adjacent = vec![Region::III, Region::IV];
        }
        if critical {
            adjacent.push(Region::II);
            notes.push("alpha = d/2: Regions II and III give the same exponent".into());
        }
        Some(Region::III)
    } else if critical {
        adjacent = vec![Region::II, Region::IV];
        notes.push("alpha = d/2: Regions II and IV give the same exponent".into());
        None
    } else {
        Some(Region::IV)
    };
    adjacent.sort();
    adjacent.dedup();
    if region == Some(Region::V) {
        notes.push("Region V is informational".into());
    }
    let owner = region.unwrap_or(Region::IV);
    ExponentResult {
        region: region.map_or(RegionTag::Boundary, RegionTag::from),
        adjacent,
        zeta: Some(owner.zeta(alpha, beta, d)),
        needs_y0,
        formula: owner.formula().to_string(),
        notes,
    }
}

/// One region boundary with both adjacent formulas evaluated on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValue<T> {
    pub lower: Region,
    pub upper: Region,
    pub beta: T,
    pub zeta_lower: T,
    pub zeta_upper: T,
}

impl<T: Scalar> BoundaryValue<T> {
    pub fn gap(&self) -> T {
        (self.zeta_lower - self.zeta_upper).abs()
    }
}

/// The I/II, I/III, II/V, III/IV and IV/V boundaries at `(d, alpha)`.
pub fn boundary_continuity<T: Scalar>(d: usize, alpha: T) -> Vec<BoundaryValue<T>> {
    let p = PhasePoint::new(alpha, T::one(), d);
    [
        (Region::I, Region::II, p.beta_i_ii()),
        (Region::I, Region::III, p.beta_i_iii()),
        (Region::II, Region::V, p.beta_v()),
        (Region::III, Region::IV, T::one()),
        (Region::IV, Region::V, p.beta_v()),
    ]
    .into_iter()
    .map(|(lower, upper, beta)| BoundaryValue {
        lower,
        upper,
        beta,
        zeta_lower: lower.zeta(alpha, beta, d),
        zeta_upper: upper.zeta(alpha, beta, d),
    })
    .collect()
}

/// Regimes of `P(eta_1 + ... + eta_n >= n^beta)` for i.i.d. variables with
/// tail exponent `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IidRegime {
    /// `beta >= 1`, `a > 1`: `(beta - 1) a + 1`.
    LargeDeviation,
    /// `beta < 1`, `beta (2 - a) < 1`: `2 beta - 1`.
    Moderate,
    /// `beta > 1 / (2 - a)`, `a < 1`: `beta a`.
    SingleJump,
}

impl IidRegime {
    pub fn zeta<T: Scalar>(self, a: T, beta: T) -> T {
        let one = T::one();
        match self {
            IidRegime::LargeDeviation => (beta - one) * a + one,
            IidRegime::Moderate => T::lit(2.0) * beta - one,
            IidRegime::SingleJump => beta * a,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IidExponent<T> {
    /// Every regime whose conditions hold.
    pub regimes: Vec<IidRegime>,
    /// The exponent when exactly one regime matches.
    pub zeta: Option<T>,
}

impl<T> IidExponent<T> {
    /// No regime, or several, matched.
    pub fn flagged(&self) -> bool {
        self.regimes.len() != 1
    }
}

pub fn iid_exponent<T: Scalar>(a: T, beta: T) -> crate::error::Result<IidExponent<T>> {
    if !(a > T::zero()) || !(beta > T::lit(0.5)) {
        return Err(crate::error::Error::param("a", "need a > 0 and beta > 1/2"));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let mut regimes = Vec::new();
    if beta >= one && a > one {
        regimes.push(IidRegime::LargeDeviation);
    }
    if beta < one && beta * (two - a) < one {
        regimes.push(IidRegime::Moderate);
    }
    if a < one && beta > one / (two - a) {
        regimes.push(IidRegime::SingleJump);
    }
    let zeta = (regimes.len() == 1).then(|| regimes[0].zeta(a, beta));
    Ok(IidExponent { regimes, zeta })
}

/// Exponent `b` of the level sets `{l_n(x) ~ n^b}` carrying the deviation,
/// and for the localized regions the exponents of the localization time `T`
/// and radius `r` in powers of `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy<T> {
    pub region: Region,
    pub level_exponent: Option<T>,
    pub time_exponent: Option<T>,
    pub radius_exponent: Option<T>,
}

pub fn strategy<T: Scalar>(region: Region, p: PhasePoint<T>) -> Strategy<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let d = T::from_usize_lossy(p.d);
    let (alpha, beta) = (p.alpha, p.beta);
    let (level, time, radius) = match region {
        Region::I => (None, None, None),
        Region::II => (Some(beta / (alpha + one)), None, None),
        Region::III => (
            Some(beta / (d / two + one)),
            Some(beta),
            Some(beta / (d + two)),
        ),
        Region::IV => (
            None,
            Some(one),
            Some((one - alpha * (beta - one)) / (d + two)),
        ),
        Region::V => (Some(one), None, None),
    };
    Strategy {
        region,
        level_exponent: level,
        time_exponent: time,
        radius_exponent: radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(alpha: f64, beta: f64, d: usize) -> ExponentResult<f64> {
        classify(PhasePoint::new(alpha, beta, d))
    }

    #[test]
    fn region_tags_serialize_as_roman_numerals() {
        assert_eq!(serde_json::to_string(&RegionTag::III).unwrap(), "\"III\"");
        assert_eq!(serde_json::to_string(&RegionTag::OutOfScope).unwrap(), "\"out-of-scope\"");
        assert_eq!(serde_json::to_string(&Region::IV).unwrap(), "\"IV\"");
    }

    #[test]
    fn worked_examples() {
        let r = z(2.0, 0.6, 5);
        assert_eq!(r.region, RegionTag::I);
        assert!((r.zeta.unwrap() - 0.2).abs() < 1e-12);
        assert!(r.needs_y0);
        let r = z(2.0, 1.0, 6);
        assert_eq!(r.region, RegionTag::II);
        assert!((r.zeta.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let r = z(4.0, 1.0, 5);
        assert_eq!(r.region, RegionTag::III);
        assert!((r.zeta.unwrap() - 5.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.adjacent, vec![Region::III, Region::IV]);
        let r = z(4.0, 1.1, 5);
        assert_eq!(r.region, RegionTag::IV);
        assert!((r.zeta.unwrap() - 29.0 / 35.0).abs() < 1e-12);
    }

    #[test]
    fn region_ii_desk_point() {
        let r = z(1.5, 0.9, 5);
        assert_eq!(r.region, RegionTag::II);
        assert!((r.zeta.unwrap() - 0.54).abs() < 1e-12);
        assert!(!r.needs_y0);
    }

    #[test]
    fn out_of_scope() {
        for (a, b, d) in [(1.0, 0.8, 5), (0.5, 0.8, 5), (2.0, 0.5, 5), (2.0, 0.8, 2), (f64::INFINITY, 0.8, 5)] {
            let r = z(a, b, d);
            assert_eq!(r.region, RegionTag::OutOfScope);
            assert!(r.zeta.is_none());
        }
    }

    #[test]
    fn boundaries_are_flagged_and_owned_from_above() {
        let r = z(2.0, 0.75, 6);
        assert_eq!(r.region, RegionTag::II);
        assert_eq!(r.adjacent, vec![Region::I, Region::II]);
        assert!(r.needs_y0);
        let r = z(3.0, 7.0 / 9.0, 5);
        assert_eq!(r.region, RegionTag::III);
        assert!(r.needs_y0);
        let r = z(2.0, 1.5, 6);
        assert_eq!(r.region, RegionTag::V);
        assert_eq!(r.adjacent, vec![Region::II, Region::V]);
        let r = z(2.5, 1.2, 5);
        assert_eq!(r.region, RegionTag::Boundary);
        assert_eq!(r.adjacent, vec![Region::II, Region::IV]);
        assert!((r.zeta.unwrap() - Region::II.zeta(2.5, 1.2, 5)).abs() < 1e-12);
    }

    #[test]
    fn continuity_on_a_grid() {
        for d in 3..=12 {
            for i in 0..100 {
                let alpha = 1.0 + 0.05 + i as f64 * 0.2;
                for b in boundary_continuity(d, alpha) {
                    assert!(b.gap() < 1e-12, "{b:?}");
                }
            }
        }
        let b = boundary_continuity(5, 2.0f64);
        assert!((b[0].zeta_lower - 0.5).abs() < 1e-12);
        assert!((b[1].zeta_lower - 5.0 / 9.0).abs() < 1e-12);
        assert!((b[2].zeta_lower - 1.0).abs() < 1e-12);
        assert!((b[3].zeta_lower - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_properties() {
        for d in 3..=8 {
            for i in 0..40 {
                let alpha = 1.1 + 0.15 * i as f64;
                let mut last: Option<(RegionTag, f64)> = None;
                let bmax = 1.0 + 1.0 / alpha;
                for j in 1..400 {
                    let beta = 0.5 + (bmax - 0.5) * j as f64 / 400.0;
                    let r = z(alpha, beta, d);
                    let zeta = r.zeta.unwrap();
                    assert!(zeta > 0.0 && zeta <= beta + 1e-12, "{alpha} {beta} {d}");
                    if let Some((reg, prev)) = last {
                        if reg == r.region {
                            assert!(zeta >= prev);
                        }
                    }
                    last = Some((r.region, zeta));
                    if r.region == RegionTag::II {
                        assert!(zeta <= 1.0 + 1e-12);
                        // Inside Region II the localized strategy is the cheaper one.
                        let cheaper = Region::II.zeta(alpha, beta, d) <= 2.0 * beta - 1.0 + 1e-12;
                        assert_eq!(cheaper, beta >= (alpha + 1.0) / (alpha + 2.0) - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn iid_examples() {
        assert_eq!(iid_exponent(2.0, 1.5).unwrap().zeta, Some(2.0));
        assert!((iid_exponent(2.0f64, 0.7).unwrap().zeta.unwrap() - 0.4).abs() < 1e-12);
        assert!((iid_exponent(0.5f64, 0.9).unwrap().zeta.unwrap() - 0.45).abs() < 1e-12);
        assert!(iid_exponent(1.0, 1.2).unwrap().flagged());
        assert!(iid_exponent(0.0, 1.2).is_err());
    }

    #[test]
    fn f32_agrees() {
        let r = classify(PhasePoint::new(4.0f32, 1.1, 5));
        assert_eq!(r.region, RegionTag::IV);
        assert!((r.zeta.unwrap() - 29.0 / 35.0).abs() < 1e-6);
    }

    #[test]
    fn strategies() {
        let s = strategy(Region::II, PhasePoint::new(1.5f64, 0.9, 5));
        assert!((s.level_exponent.unwrap() - 0.36).abs() < 1e-12);
        let s = strategy(Region::III, PhasePoint::new(4.0f64, 1.0, 5));
        assert!((s.radius_exponent.unwrap() - 1.0 / 7.0).abs() < 1e-12);
    }
}

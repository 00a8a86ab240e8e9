//! Lattice Green kernel `G_d(x) = E_0[l_inf(x)]` and the constants built from it.
//!
//! The Fourier integral `(2 pi)^{-d} int cos(x.theta) / (1 - phi(theta))` is
//! evaluated through the Laplace form `1/(1-phi) = int_0^inf e^{-t(1-phi)} dt`,
//! which factorizes over coordinates:
//!
//! ```text
//! G_d(x) = d int_0^inf prod_j e^{-s} I_{|x_j|}(s) ds
//! ```
//!
//! The integral over `[0, S]` uses adaptive Gauss–Legendre panels; the tail
//! `[S, inf)` is integrated term by term from the Hankel expansion.

use crate::bessel::{asymptotic_coefficients, scaled_bessel_i};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::quadrature::{AdaptiveIntegrator, Estimate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

const TAIL_TERMS: usize = 8;

/// `int_0^inf s^power prod_j e^{-s} I_{nu_j}(s) ds`.
///
/// Converges when `power < d/2 - 1`.
pub fn bessel_product_integral(nus: &[u32], power: i32, tol: f64) -> Result<Estimate<f64>> {
    let d = nus.len();
    let decay = d as f64 / 2.0 - power as f64;
    if decay <= 1.0 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "the Green integral diverges in this dimension",
        });
    }
    let nu_max = nus.iter().copied().max().unwrap_or(0) as f64;
    let mut cutoff = 1024.0f64;
    while cutoff < 64.0 * (nu_max * nu_max + 1.0) {
        cutoff *= 2.0;
    }

    let integrand = |s: f64| -> f64 {
        let mut p = s.powi(power);
        for &nu in nus {
            p *= scaled_bessel_i(nu, s);
        }
        p
    };

    let quad = AdaptiveIntegrator::<f64>::new(16);
    let mut edges = vec![0.0, 1.0];
    while *edges.last().unwrap() < cutoff {
        let last = *edges.last().unwrap();
        edges.push(last * 2.0);
    }
    let panel_tol = tol / (2.0 * edges.len() as f64);
    let mut value = 0.0;
    let mut error = 0.0;
    let mut f = integrand;
    for w in edges.windows(2) {
        let e = quad.integrate(w[0], w[1], panel_tol, &mut f);
        value += e.value;
        error += e.error;
    }

    // Tail from the product of the per-coordinate asymptotic series in 1/s.
    let mut poly = vec![0.0; TAIL_TERMS];
    poly[0] = 1.0;
    for &nu in nus {
        let a = asymptotic_coefficients(nu, TAIL_TERMS);
        let mut next = vec![0.0; TAIL_TERMS];
        for (i, &p) in poly.iter().enumerate() {
            for (k, &ak) in a.iter().enumerate().take(TAIL_TERMS - i) {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                next[i + k] += p * sign * ak;
            }
        }
        poly = next;
    }
    let pref = (2.0 * PI).powf(-(d as f64) / 2.0);
    let terms: Vec<f64> = poly
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let e = decay + k as f64 - 1.0;
            pref * c * cutoff.powf(-e) / e
        })
        .collect();
    let tail: f64 = terms.iter().sum();
    error += terms.last().map(|t| t.abs()).unwrap_or(0.0);
    value += tail;
    Ok(Estimate { value, error })
}

fn check_transient(d: usize) -> Result<()> {
    if d < 3 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "the walk is recurrent and G_d(0) is infinite",
        });
    }
    Ok(())
}

/// `G_d(x)` with a reported absolute quadrature error.
pub fn green_value(d: usize, x: &Site, tol: f64) -> Result<Estimate<f64>> {
    check_transient(d)?;
    if x.dim() != d {
        return Err(Error::param("x", format!("site has dimension {}, expected {d}", x.dim())));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let nus: Vec<u32> = x.coords().iter().map(|c| c.unsigned_abs()).collect();
    let df = d as f64;
    let e = bessel_product_integral(&nus, 0, tol / df)?;
    Ok(Estimate {
        value: df * e.value,
        error: df * e.error,
    })
}

/// `sum_x G_d(x)^2` computed directly as `d^2 int_0^inf s (e^{-s} I_0(s))^d ds`
/// (Parseval), without any spatial truncation. Requires `d >= 5`.
pub fn green_square_sum(d: usize, tol: f64) -> Result<Estimate<f64>> {
    check_square_summable(d)?;
    let df = d as f64;
    let e = bessel_product_integral(&vec![0; d], 1, tol / (df * df))?;
    Ok(Estimate {
        value: df * df * e.value,
        error: df * df * e.error,
    })
}

fn check_square_summable(d: usize) -> Result<()> {
    check_transient(d)?;
    if d < 5 {
        return Err(Error::UnsupportedDimension {
            d,
            reason: "sum_x G_d(x)^2 diverges for d <= 4",
        });
    }
    Ok(())
}

/// Asymptotic constant of `G_d(x) ~ c_d |x|^{2-d}`:
/// `c_d = d Gamma(d/2 - 1) / (2 pi^{d/2})`.
pub fn green_decay_constant(d: usize) -> f64 {
    let df = d as f64;
    df * gamma_half_integer(d as u32 - 2) / (2.0 * PI.powf(df / 2.0))
}

/// `Gamma(k / 2)` for positive integers `k`.
fn gamma_half_integer(k: u32) -> f64 {
    let mut g = if k % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut m = if k % 2 == 0 { 2 } else { 1 };
    while m < k {
        g *= m as f64 / 2.0;
        m += 2;
    }
    g
}

/// Number of sites `x` with `x.canonical() == c`.
pub fn orbit_size(c: &Site) -> u64 {
    let coords = c.coords();
    let d = coords.len() as u64;
    let mut count: u64 = (1..=d).product();
    let mut i = 0;
    while i < coords.len() {
        let mut j = i;
        while j < coords.len() && coords[j] == coords[i] {
            j += 1;
        }
        count /= (1..=(j - i) as u64).product::<u64>();
        i = j;
    }
    count << coords.iter().filter(|&&v| v != 0).count()
}

/// Canonical sites (non-increasing non-negative coordinates) with
/// `|x|_inf <= radius`.
pub fn canonical_sites(d: usize, radius: u32) -> Vec<Site> {
    fn rec(d: usize, cap: i32, prefix: &mut Vec<i32>, out: &mut Vec<Site>) {
        if prefix.len() == d {
            out.push(Site::new(prefix));
            return;
        }
        for v in (0..=cap).rev() {
            prefix.push(v);
            rec(d, v, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, radius as i32, &mut Vec::with_capacity(d), &mut out);
    out.sort_unstable();
    out
}

/// `G_d` on the box `|x|_inf <= radius`, stored per symmetry class.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenTable {
    d: usize,
    radius: u32,
    tol: f64,
    quadrature_error: f64,
    values: BTreeMap<Site, f64>,
}

impl GreenTable {
    pub fn build(d: usize, radius: u32, tol: f64) -> Result<Self> {
        check_transient(d)?;
        let sites = canonical_sites(d, radius);
        let evaluated: Vec<(Site, Estimate<f64>)> = sites
            .into_par_iter()
            .map(|s| green_value(d, &s, tol).map(|e| (s, e)))
            .collect::<Result<_>>()?;
        let quadrature_error = evaluated.iter().map(|(_, e)| e.error).fold(0.0, f64::max);
        Ok(Self {
            d,
            radius,
            tol,
            quadrature_error,
            values: evaluated.into_iter().map(|(s, e)| (s, e.value)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Largest per-site quadrature error estimate.
    pub fn quadrature_error(&self) -> f64 {
        self.quadrature_error
    }

    /// `G_d(x)` if `x` lies in the tabulated box.
    pub fn get(&self, x: &Site) -> Option<f64> {
        self.values.get(&x.canonical()).copied()
    }

    pub fn g0(&self) -> f64 {
        self.values[&Site::origin(self.d)]
    }

    pub fn canonical_values(&self) -> impl Iterator<Item = (&Site, f64)> + '_ {
        self.values.iter().map(|(s, &v)| (s, v))
    }

    /// Sum of `G_d(x)^2` over the tabulated box.
    pub fn truncated_square_sum(&self) -> f64 {
        self.values
            .iter()
            .map(|(s, v)| orbit_size(s) as f64 * v * v)
            .sum()
    }

    /// `(mean, max)` of `G_d(x) |x|^{d-2}` over the outermost shell.
    fn shell_decay(&self) -> (f64, f64) {
        let e = self.d as f64 - 2.0;
        let axis = {
            let mut c = vec![0; self.d];
            c[0] = self.radius as i32;
            Site::new(&c)
        };
        let on_axis = self.values[&axis] * (self.radius as f64).powf(e);
        let max = self
            .values
            .iter()
            .filter(|(s, _)| s.linf_norm() == self.radius)
            .map(|(s, v)| v * s.norm_sq().powf(e / 2.0))
            .fold(0.0, f64::max);
        (on_axis, max)
    }

    pub fn constants(&self) -> Result<GreenConstants> {
        check_square_summable(self.d)?;
        if self.radius < 2 {
            return Err(Error::param("radius", "need at least 2 shells to fit the decay"));
        }
        let g0 = self.g0();
        let truncated = self.truncated_square_sum();
        let (c_axis, c_max) = self.shell_decay();
        let exterior = exterior_power_sum(self.d, self.radius);
        Ok(GreenConstants {
            d: self.d,
            radius: self.radius,
            tol: self.tol,
            g0,
            m1: truncated + c_axis * c_axis * exterior,
            m1_truncated: truncated,
            m1_tail_bound: c_max * c_max * exterior,
            decay_constant: c_axis,
            y0_silt: 1.0 + 2.0 * (truncated + c_axis * c_axis * exterior),
            return_prob: 1.0 - 1.0 / g0,
        })
    }

    pub fn to_file(&self) -> Result<GreenFile> {
        let constants = self.constants().ok();
        Ok(GreenFile {
            d: self.d,
            radius: self.radius,
            tol: self.tol,
            quadrature_error: self.quadrature_error,
            values: self
                .values
                .iter()
                .map(|(s, &g)| GreenEntry {
                    coords: s.coords().to_vec(),
                    g,
                })
                .collect(),
            g0: self.g0(),
            m1: constants.as_ref().map(|c| c.m1),
            m1_tail_bound: constants.as_ref().map(|c| c.m1_tail_bound),
            y0_silt: constants.as_ref().map(|c| c.y0_silt),
            return_prob: 1.0 - 1.0 / self.g0(),
        })
    }

    pub fn from_file(file: &GreenFile) -> Result<Self> {
        let mut values = BTreeMap::new();
        for e in &file.values {
            if e.coords.len() != file.d {
                return Err(Error::param("values", "entry with wrong dimension"));
            }
            values.insert(Site::new(&e.coords).canonical(), e.g);
        }
        if !values.contains_key(&Site::origin(file.d)) {
            return Err(Error::param("values", "missing the origin"));
        }
        Ok(Self {
            d: file.d,
            radius: file.radius,
            tol: file.tol,
            quadrature_error: file.quadrature_error,
            values,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file()?)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file(&serde_json::from_str(&text)?)
    }
}

/// `sum_{|x|_inf > R} |x|_2^{4-2d}`: explicit shells out to `4R`, then the
/// shell sums `A rho^{3-d}` extrapolated with `A` fitted on the last shell.
fn exterior_power_sum(d: usize, radius: u32) -> f64 {
    let e = 2.0 - d as f64;
    let outer = 4 * radius.max(1);
    let mut total = 0.0;
    let mut last_shell = 0.0;
    let mut shells = vec![0.0; (outer + 1) as usize];
    for s in canonical_sites(d, outer) {
        let rho = s.linf_norm();
        if rho > radius {
            shells[rho as usize] += orbit_size(&s) as f64 * s.norm_sq().powf(e);
        }
    }
    for (rho, &v) in shells.iter().enumerate().skip(radius as usize + 1) {
        total += v;
        if rho as u32 == outer {
            last_shell = v;
        }
    }
    let amp = last_shell * (outer as f64).powf(d as f64 - 3.0);
    total + amp * (outer as f64 + 0.5).powf(4.0 - d as f64) / (d as f64 - 4.0)
}

/// Constants derived from the Green kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenConstants {
    pub d: usize,
    pub radius: u32,
    pub tol: f64,
    /// `G_d(0)`.
    pub g0: f64,
    /// `sum_x G_d(x)^2`: truncated sum plus the fitted tail estimate.
    pub m1: f64,
    pub m1_truncated: f64,
    /// Tail bound using the largest decay constant seen on the last shell.
    pub m1_tail_bound: f64,
    /// Fitted `c` in `G_d(x) ~ c |x|^{2-d}` along the axis.
    pub decay_constant: f64,
    /// `1 + 2 m1`.
    pub y0_silt: f64,
    /// `1 - 1/G_d(0)`.
    pub return_prob: f64,
}

impl GreenConstants {
    /// Limit of `E[sum_x l_n(x)^2] / n`, i.e. `2 G_d(0) - 1`.
    pub fn mean_silt_rate(&self) -> f64 {
        2.0 * self.g0 - 1.0
    }
}

pub fn green_constants(d: usize, radius: u32, tol: f64) -> Result<GreenConstants> {
    check_square_summable(d)?;
    GreenTable::build(d, radius, tol)?.constants()
}

/// `1 - 1/G_d(0)`.
pub fn return_probability(d: usize, tol: f64) -> Result<f64> {
    Ok(1.0 - 1.0 / green_value(d, &Site::origin(d), tol)?.value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenEntry {
    pub coords: Vec<i32>,
    pub g: f64,
}

/// On-disk form of a [`GreenTable`]; only canonical sites are listed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenFile {
    pub d: usize,
    pub radius: u32,
    pub tol: f64,
    pub quadrature_error: f64,
    pub values: Vec<GreenEntry>,
    pub g0: f64,
    pub m1: Option<f64>,
    pub m1_tail_bound: Option<f64>,
    pub y0_silt: Option<f64>,
    pub return_prob: f64,
}

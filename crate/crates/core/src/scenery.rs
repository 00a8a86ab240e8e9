//! Random sceneries: i.i.d. centered site values with a stretched-exponential
//! tail, the random walk in random scenery `X_n`, and the shear-flow model.

use crate::error::{Error, Result};
use crate::lattice::{LocalTimeField, Site, Trajectory, Walker};
use crate::quadrature::{AdaptiveIntegrator, Estimate};
use crate::rng::{self, mix64, StreamRng};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// Law of `eta(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneryFamily {
    /// `sign * W` with `P(W > t) = exp(-c t^alpha)`.
    SymmetricWeibull,
    /// Centered normal; tail exponent 2.
    Gaussian,
    /// Uniform on `[-a, a]`; bounded, tail exponent `+inf`.
    SymmetricBounded,
    /// Density proportional to `exp(-c |x|^alpha)`: even and decreasing on
    /// the half-line, with the same tail exponent as the Weibull family.
    ExpPower,
}

fn default_c() -> f64 {
    1.0
}

fn default_variance() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    2.0
}

/// A scenery law plus the base seed that fixes one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneryModel {
    pub family: SceneryFamily,
    /// Tail exponent; only read by the Weibull and exp-power families.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Tail constant `c` in `log P(eta > t) ~ -c t^alpha`.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Variance of the gaussian and bounded families.
    #[serde(default = "default_variance")]
    pub variance: f64,
    #[serde(default)]
    pub seed_base: u64,
}

impl SceneryModel {
    pub fn weibull(alpha: f64, c: f64, seed_base: u64) -> Result<Self> {
        Self {
            family: SceneryFamily::SymmetricWeibull,
            alpha,
            c,
            variance: 1.0,
            seed_base,
        }
        .validated()
    }

    pub fn exp_power(alpha: f64, c: f64, seed_base: u64) -> Result<Self> {
        Self {
            family: SceneryFamily::ExpPower,
            alpha,
            c,
            variance: 1.0,
            seed_base,
        }
        .validated()
    }

    pub fn gaussian(variance: f64, seed_base: u64) -> Result<Self> {
        Self {
            family: SceneryFamily::Gaussian,
            alpha: 2.0,
            c: 1.0 / (2.0 * variance),
            variance,
            seed_base,
        }
        .validated()
    }

    pub fn bounded(variance: f64, seed_base: u64) -> Result<Self> {
        Self {
            family: SceneryFamily::SymmetricBounded,
            alpha: f64::INFINITY,
            c: 1.0,
            variance,
            seed_base,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self.family {
            SceneryFamily::SymmetricWeibull | SceneryFamily::ExpPower => {
                if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                    return Err(Error::param("alpha", "tail exponent must be positive"));
                }
                if !(self.c > 0.0 && self.c.is_finite()) {
                    return Err(Error::param("c", "tail constant must be positive"));
                }
            }
            SceneryFamily::Gaussian | SceneryFamily::SymmetricBounded => {
                if !(self.variance > 0.0 && self.variance.is_finite()) {
                    return Err(Error::param("variance", "must be positive"));
                }
            }
        }
        Ok(self)
    }

    pub fn with_seed(&self, seed_base: u64) -> Self {
        Self {
            seed_base,
            ..self.clone()
        }
    }

    /// The `alpha` of `log P(eta > t) / t^alpha -> -c`.
    pub fn tail_exponent(&self) -> f64 {
        match self.family {
            SceneryFamily::SymmetricWeibull | SceneryFamily::ExpPower => self.alpha,
            SceneryFamily::Gaussian => 2.0,
            SceneryFamily::SymmetricBounded => f64::INFINITY,
        }
    }

    /// The `c` of `log P(eta > t) / t^alpha -> -c`.
    pub fn tail_constant(&self) -> f64 {
        match self.family {
            SceneryFamily::Gaussian => 1.0 / (2.0 * self.variance),
            _ => self.c,
        }
    }

    fn half_width(&self) -> f64 {
        (3.0 * self.variance).sqrt()
    }

    /// Whether the density is even and non-increasing on the half-line.
    pub fn is_bell_shaped(&self) -> bool {
        match self.family {
            SceneryFamily::SymmetricWeibull => self.alpha <= 1.0,
            _ => true,
        }
    }

    pub fn variance(&self) -> f64 {
        match self.family {
            SceneryFamily::SymmetricWeibull => {
                self.c.powf(-2.0 / self.alpha) * ln_gamma(1.0 + 2.0 / self.alpha).exp()
            }
            SceneryFamily::ExpPower => {
                self.c.powf(-2.0 / self.alpha)
                    * (ln_gamma(3.0 / self.alpha) - ln_gamma(1.0 / self.alpha)).exp()
            }
            SceneryFamily::Gaussian | SceneryFamily::SymmetricBounded => self.variance,
        }
    }

    /// One draw of `eta(0)`.
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let bits = rng.next_u64();
        let u = rng::open_unit(bits);
        match self.family {
            SceneryFamily::SymmetricWeibull => {
                let sign = if rng.next_u64() >> 63 == 0 { 1.0 } else { -1.0 };
                sign * (-u.ln() / self.c).powf(1.0 / self.alpha)
            }
            SceneryFamily::Gaussian => {
                -std::f64::consts::SQRT_2 * self.variance.sqrt() * erfc_inv(2.0 * u)
            }
            SceneryFamily::SymmetricBounded => self.half_width() * (2.0 * u - 1.0),
            SceneryFamily::ExpPower => {
                let sign = if bits >> 63 == 0 { 1.0 } else { -1.0 };
                let g: f64 = Gamma::new(1.0 / self.alpha, 1.0)
                    .expect("valid gamma shape")
                    .sample(rng);
                sign * (g / self.c).powf(1.0 / self.alpha)
            }
        }
    }

    /// `eta(site)` for this model's `seed_base`; a pure function of both.
    pub fn value_at(&self, site: &Site) -> f64 {
        let mut r = rng::seeded(site_hash(self.seed_base, site));
        self.draw(&mut r)
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let ax = x.abs();
        match self.family {
            SceneryFamily::SymmetricWeibull => {
                (self.c * self.alpha / 2.0).ln() + (self.alpha - 1.0) * ax.ln()
                    - self.c * ax.powf(self.alpha)
            }
            SceneryFamily::Gaussian => {
                -0.5 * x * x / self.variance
                    - 0.5 * (2.0 * std::f64::consts::PI * self.variance).ln()
            }
            SceneryFamily::SymmetricBounded => {
                let a = self.half_width();
                if ax <= a {
                    -(2.0 * a).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            SceneryFamily::ExpPower => {
                self.alpha.ln() + self.c.ln() / self.alpha
                    - std::f64::consts::LN_2
                    - ln_gamma(1.0 / self.alpha)
                    - self.c * ax.powf(self.alpha)
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// `P(eta > t)` for `t >= 0`.
    pub fn tail_probability(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self.family {
            SceneryFamily::SymmetricWeibull => 0.5 * (-self.c * t.powf(self.alpha)).exp(),
            SceneryFamily::Gaussian => 0.5 * erfc(t / (2.0 * self.variance).sqrt()),
            SceneryFamily::SymmetricBounded => {
                let a = self.half_width();
                ((a - t) / (2.0 * a)).max(0.0)
            }
            SceneryFamily::ExpPower if t == 0.0 => 0.5,
            SceneryFamily::ExpPower => 0.5 * gamma_ur(1.0 / self.alpha, self.c * t.powf(self.alpha)),
        }
    }

    /// Log-Laplace transform `Lambda(t) = log E[exp(t eta)]`.
    pub fn log_laplace(&self, t: f64) -> Result<Estimate<f64>> {
        self.laplace(t).map(|l| Estimate {
            value: l.log_z,
            error: l.rel_err,
        })
    }

    /// `Lambda'(t)`, the mean of the exponentially tilted law.
    pub fn tilted_mean(&self, t: f64) -> Result<f64> {
        self.laplace(t).map(|l| l.mean)
    }

    fn laplace(&self, t: f64) -> Result<Laplace> {
        if t == 0.0 {
            return Ok(Laplace {
                log_z: 0.0,
                mean: 0.0,
                rel_err: 0.0,
            });
        }
        let s = t.abs();
        let sign = t.signum();
        match self.family {
            SceneryFamily::Gaussian => Ok(Laplace {
                log_z: 0.5 * self.variance * t * t,
                mean: self.variance * t,
                rel_err: 0.0,
            }),
            SceneryFamily::SymmetricBounded => {
                let a = self.half_width();
                let x = a * s;
                let log_z = if x < 1e-4 {
                    x * x / 6.0 - x.powi(4) / 180.0
                } else {
                    x - (2.0 * x).ln() + (-(-2.0 * x).exp()).ln_1p()
                };
                let mean = if x < 1e-4 {
                    a * (x / 3.0 - x.powi(3) / 45.0)
                } else {
                    a / x.tanh() - 1.0 / s
                };
                Ok(Laplace {
                    log_z,
                    mean: sign * mean,
                    rel_err: 0.0,
                })
            }
            SceneryFamily::SymmetricWeibull | SceneryFamily::ExpPower => {
                let alpha = self.alpha;
                if alpha < 1.0 || (alpha == 1.0 && s >= self.c) {
                    return Err(Error::Divergent { t });
                }
                if alpha == 1.0 {
                    // Both families reduce to the Laplace law with rate c.
                    let c2 = self.c * self.c;
                    return Ok(Laplace {
                        log_z: (c2 / (c2 - s * s)).ln(),
                        mean: sign * 2.0 * s / (c2 - s * s),
                        rel_err: 0.0,
                    });
                }
                let l = self.laplace_quadrature(s);
                Ok(Laplace {
                    mean: sign * l.mean,
                    ..l
                })
            }
        }
    }

    /// `Z(s) = int_0^inf f(w) (e^{sw} + e^{-sw}) dw` in log scale, `s > 0`.
    fn laplace_quadrature(&self, s: f64) -> Laplace {
        let g = |w: f64| self.log_density(w) + s * w;
        let (peak, hi) = tilted_window(self, s);
        let shift = g(peak).max(self.log_density(peak.max(1e-300)));
        // The exponent carries round-off of order eps * |shift|.
        let quad = AdaptiveIntegrator::<f64>::new(12).with_rel_floor(64.0 * f64::EPSILON * shift.abs().max(1.0));
        let mut z_fn = |w: f64| {
            if w <= 0.0 {
                return 0.0;
            }
            let lf = self.log_density(w) - shift;
            (lf + s * w).exp() + (lf - s * w).exp()
        };
        let mut m_fn = |w: f64| {
            if w <= 0.0 {
                return 0.0;
            }
            let lf = self.log_density(w) - shift;
            w * ((lf + s * w).exp() - (lf - s * w).exp())
        };
        let tol = 1e-13 * hi.max(1.0);
        let mut z = Estimate { value: 0.0, error: 0.0 };
        let mut m = Estimate { value: 0.0, error: 0.0 };
        let mut edges = vec![0.0, peak, hi];
        edges.dedup();
        for w in edges.windows(2) {
            let a = quad.integrate(w[0], w[1], tol, &mut z_fn);
            let b = quad.integrate(w[0], w[1], tol * hi.max(1.0), &mut m_fn);
            z.value += a.value;
            z.error += a.error;
            m.value += b.value;
            m.error += b.error;
        }
        Laplace {
            log_z: shift + z.value.ln(),
            mean: m.value / z.value,
            rel_err: z.error / z.value,
        }
    }

    /// Numerical bounds `Lambda(t) <= C0 t^2` on `|t| <= 1` and
    /// `Lambda(t) <= Cinf t^{alpha*}` on `[1, t_max]`, from a grid.
    pub fn fit_log_laplace(&self, t_max: f64) -> Result<LogLaplace> {
        let alpha = self.tail_exponent();
        let alpha_star = if alpha.is_infinite() {
            1.0
        } else if alpha > 1.0 {
            alpha / (alpha - 1.0)
        } else {
            return Err(Error::param("alpha", "conjugate exponent needs alpha > 1"));
        };
        // Lambda(t) / t^2 tends to Var / 2 as t -> 0.
        let mut c0: f64 = self.variance() / 2.0;
        for i in 1..=100 {
            let t = i as f64 / 100.0;
            c0 = c0.max(self.log_laplace(t)?.value / (t * t));
        }
        let mut cinf: f64 = 0.0;
        let steps = 200;
        for i in 0..=steps {
            let t = 1.0 + (t_max - 1.0) * i as f64 / steps as f64;
            cinf = cinf.max(self.log_laplace(t)?.value / t.powf(alpha_star));
        }
        Ok(LogLaplace {
            alpha_star,
            c0,
            cinf,
        })
    }
}

struct Laplace {
    log_z: f64,
    mean: f64,
    rel_err: f64,
}

/// Mode and right end of the window carrying the tilted density
/// `f(w) e^{sw}` on `w > 0`, down to a relative level of `e^{-60}`.
fn tilted_window(model: &SceneryModel, s: f64) -> (f64, f64) {
    let g = |w: f64| model.log_density(w) + s * w;
    let scale = model.variance().sqrt();
    // Golden-section search on a bracket found by doubling; g is unimodal on
    // w > 0 for the families handled here.
    let mut hi = scale;
    while g(2.0 * hi) > g(hi) {
        hi *= 2.0;
    }
    hi *= 2.0;
    let (mut a, mut b) = (0.0f64, hi);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if g(x1.max(1e-300)) < g(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    let peak = 0.5 * (a + b);
    let top = g(peak.max(1e-300));
    let mut step = scale.max(peak * 0.25);
    let mut end = peak + step;
    while g(end) > top - 60.0 {
        step *= 1.5;
        end += step;
    }
    (peak, end)
}

/// Fitted constants of the log-Laplace transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLaplace {
    /// `alpha / (alpha - 1)`; 1 for bounded sceneries.
    pub alpha_star: f64,
    pub c0: f64,
    pub cinf: f64,
}

/// Deterministic 64-bit hash of `(seed_base, site)`.
pub fn site_hash(seed_base: u64, site: &Site) -> u64 {
    let mut h = mix64(seed_base ^ 0x5EED_5CE7_E2F1_E1D5);
    for &c in site.coords() {
        h = mix64(h ^ (c as u32 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    h
}

#[derive(Clone, Debug)]
enum Source {
    Model(SceneryModel),
    Constant(f64),
}

/// A scenery realization, evaluated lazily site by site.
#[derive(Clone, Debug)]
pub struct SceneryField {
    source: Source,
    values: FxHashMap<Site, f64>,
}

impl SceneryField {
    pub fn new(model: SceneryModel) -> Self {
        Self {
            source: Source::Model(model),
            values: FxHashMap::default(),
        }
    }

    /// `eta = value` everywhere.
    pub fn constant(value: f64) -> Self {
        Self {
            source: Source::Constant(value),
            values: FxHashMap::default(),
        }
    }

    /// Overrides the values on the given sites.
    pub fn with_values<I: IntoIterator<Item = (Site, f64)>>(mut self, values: I) -> Self {
        self.values.extend(values);
        self
    }

    /// `eta(site)`; repeated queries return the same value.
    pub fn get(&self, site: &Site) -> f64 {
        if let Some(&v) = self.values.get(site) {
            return v;
        }
        match &self.source {
            Source::Model(m) => m.value_at(site),
            Source::Constant(v) => *v,
        }
    }

    pub fn materialize<'a, I: IntoIterator<Item = &'a Site>>(&mut self, sites: I) {
        for s in sites {
            if !self.values.contains_key(s) {
                let v = self.get(s);
                self.values.insert(s.clone(), v);
            }
        }
    }

    pub fn materialized(&self) -> usize {
        self.values.len()
    }

    pub fn model(&self) -> Option<&SceneryModel> {
        match &self.source {
            Source::Model(m) => Some(m),
            Source::Constant(_) => None,
        }
    }
}

/// Scenery realization of `model`, materialized on `sites`.
pub fn sample_scenery_on<'a, I: IntoIterator<Item = &'a Site>>(
    sites: I,
    model: &SceneryModel,
) -> Result<SceneryField> {
    let model = model.clone().validated()?;
    let mut f = SceneryField::new(model);
    f.materialize(sites);
    Ok(f)
}

/// `X_n = sum_x l_n(x) eta(x)`.
pub fn rwrs_value(field: &LocalTimeField, scenery: &SceneryField) -> f64 {
    let mut terms: Vec<(Site, u32)> = field.iter().collect();
    // Fixed summation order keeps the value reproducible.
    terms.sort_unstable();
    terms
        .iter()
        .map(|(s, c)| *c as f64 * scenery.get(s))
        .sum()
}

/// `X_n = sum_{k=0}^n eta(S_k)`.
pub fn rwrs_step_sum(t: &Trajectory, scenery: &SceneryField) -> f64 {
    t.sites().map(|s| scenery.get(&s)).sum()
}

/// Law of the longitudinal collision increments `alpha_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LongitudinalLaw {
    Zero,
    /// Uniform on `{-1, +1}`.
    Rademacher,
    /// Uniform on `{-1, 0, +1}`.
    Ternary,
}

/// Law of the collision increments `(alpha_k, beta_k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionLaw {
    pub longitudinal: LongitudinalLaw,
    /// Whether `beta_k` is a nearest-neighbour step (otherwise zero).
    pub transverse_walk: bool,
}

impl CollisionLaw {
    pub const NONE: CollisionLaw = CollisionLaw {
        longitudinal: LongitudinalLaw::Zero,
        transverse_walk: false,
    };
}

/// Position `R_n` in `R x Z^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportState {
    pub x: f64,
    pub y: Site,
}

/// A shear-flow path with the collision increments that produced it.
#[derive(Clone, Debug)]
pub struct TransportPath {
    pub states: Vec<TransportState>,
    pub alphas: Vec<i64>,
    /// The transverse walk `S_k = beta_1 + ... + beta_k`.
    pub walk: Vec<Site>,
}

/// Iterates `R_{n+1} - R_n = V(R_n) + (alpha_{n+1}, beta_{n+1})` with
/// `V(x, y) = eta(y) e_x` from `R_0 = 0`.
pub fn shear_transport(
    d: usize,
    n: usize,
    scenery: &SceneryField,
    law: CollisionLaw,
    seed: u64,
) -> Result<TransportPath> {
    let mut rng: StreamRng = rng::seeded(seed);
    let mut walker = Walker::new(d, mix64(seed ^ 0xB37A))?;
    let mut state = TransportState {
        x: 0.0,
        y: Site::origin(d),
    };
    let mut states = Vec::with_capacity(n + 1);
    let mut alphas = Vec::with_capacity(n);
    let mut walk = Vec::with_capacity(n + 1);
    states.push(state.clone());
    walk.push(state.y.clone());
    for _ in 0..n {
        let alpha = match law.longitudinal {
            LongitudinalLaw::Zero => 0,
            LongitudinalLaw::Rademacher => {
                if rng.random::<bool>() {
                    1
                } else {
                    -1
                }
            }
            LongitudinalLaw::Ternary => rng.random_range(-1..=1),
        };
        let drift = scenery.get(&state.y);
        let y = if law.transverse_walk {
            walker.step();
            walker.position().clone()
        } else {
            state.y.clone()
        };
        state = TransportState {
            x: state.x + drift + alpha as f64,
            y,
        };
        alphas.push(alpha);
        walk.push(state.y.clone());
        states.push(state.clone());
    }
    Ok(TransportPath {
        states,
        alphas,
        walk,
    })
}

/// Closed form of the recursion: the first coordinate of `R_n` is
/// `alpha_1 + ... + alpha_n + eta(S_0) + ... + eta(S_{n-1})`.
pub fn transport_closed_form(path: &TransportPath, scenery: &SceneryField, n: usize) -> f64 {
    let alphas: i64 = path.alphas[..n].iter().sum();
    let drift: f64 = path.walk[..n].iter().map(|s| scenery.get(s)).sum();
    alphas as f64 + drift
}

/// Exact sampler for a sitewise exponential tilt `f(x) e^{sx - Lambda(s)}`.
/// Families without a closed form are drawn by rejection from a
/// piecewise-constant envelope over the window holding all but `e^{-60}` of
/// the tilted mass. `sample` returns the draw and `log f(x) - log q(x)`.
#[derive(Clone, Debug)]
pub struct TiltedSampler {
    kind: Tilted,
}

#[derive(Clone, Debug)]
enum Tilted {
    Untilted(SceneryModel),
    Gaussian { sd: f64, s: f64, lambda: f64 },
    Bounded { a: f64, s: f64, lambda: f64 },
    Table(Box<Table>),
}

#[derive(Clone, Debug)]
struct Table {
    model: SceneryModel,
    s: f64,
    lambda: f64,
    top: f64,
    lo: f64,
    width: f64,
    cdf: Vec<f64>,
    log_env: Vec<f64>,
}

const TABLE_CELLS: usize = 1024;

impl TiltedSampler {
    pub fn new(model: &SceneryModel, s: f64) -> Result<Self> {
        if s == 0.0 {
            return Ok(Self {
                kind: Tilted::Untilted(model.clone()),
            });
        }
        let lambda = model.log_laplace(s)?.value;
        let kind = match model.family {
            SceneryFamily::Gaussian => Tilted::Gaussian {
                sd: model.variance.sqrt(),
                s,
                lambda,
            },
            SceneryFamily::SymmetricBounded => Tilted::Bounded {
                a: model.half_width(),
                s,
                lambda,
            },
            _ => Tilted::Table(Box::new(Table::build(model, s, lambda)?)),
        };
        Ok(Self { kind })
    }

    /// Draw `x` from the proposal, with `log f(x) - log q(x)`.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match &self.kind {
            Tilted::Untilted(m) => (m.draw(rng), 0.0),
            Tilted::Gaussian { sd, s, lambda } => {
                let u = rng::open_unit(rng.next_u64());
                let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u);
                let x = sd * sd * s + sd * z;
                (x, -s * x + lambda)
            }
            Tilted::Bounded { a, s, lambda } => {
                let u = rng::open_unit(rng.next_u64());
                // Inverse CDF of the density proportional to e^{sx} on [-a, a].
                let x = if *s > 0.0 {
                    a + (u + (1.0 - u) * (-2.0 * a * s).exp()).ln() / s
                } else {
                    -a + (u + (1.0 - u) * (2.0 * a * s).exp()).ln() / s
                };
                (x, -s * x + lambda)
            }
            Tilted::Table(t) => t.sample(rng),
        }
    }
}

impl Table {
    fn build(model: &SceneryModel, s: f64, lambda: f64) -> Result<Self> {
        if model.tail_exponent() < 1.0 {
            return Err(Error::Divergent { t: s });
        }
        // On each half-line the tilted log-density is concave, so its maximum
        // over a cell sits at an endpoint, at the mode or at the origin.
        let (mode_pos, hi) = tilted_window(model, s);
        let (mode_neg, neg_end) = tilted_window(model, -s);
        let lo = -neg_end;
        let g = |x: f64| model.log_density(if x == 0.0 { 1e-300 } else { x }) + s * x;
        let inner = [mode_pos, -mode_neg, 0.0];
        let top = inner.iter().map(|&x| g(x)).fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / TABLE_CELLS as f64;
        let log_env: Vec<f64> = (0..TABLE_CELLS)
            .map(|i| {
                let (a, b) = (lo + i as f64 * width, lo + (i + 1) as f64 * width);
                inner
                    .iter()
                    .filter(|&&x| a < x && x < b)
                    .map(|&x| g(x))
                    .fold(g(a).max(g(b)), f64::max)
                    - top
            })
            .collect();
        let masses: Vec<f64> = log_env.iter().map(|&l| l.exp()).collect();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegenerateWeights(format!("empty tilted table at s = {s}")));
        }
        let mut cdf = Vec::with_capacity(TABLE_CELLS);
        let mut acc = 0.0;
        for &m in &masses {
            acc += m / total;
            cdf.push(acc);
        }
        Ok(Self {
            model: model.clone(),
            s,
            lambda,
            top,
            lo,
            width,
            cdf,
            log_env,
        })
    }

    fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        loop {
            let u = rng::open_unit(rng.next_u64());
            let i = self.cdf.partition_point(|&c| c < u).min(TABLE_CELLS - 1);
            if self.log_env[i] == f64::NEG_INFINITY {
                continue;
            }
            let x = self.lo + (i as f64 + rng::open_unit(rng.next_u64())) * self.width;
            let log_ratio = self.model.log_density(x) + self.s * x - self.top - self.log_env[i];
            if rng::open_unit(rng.next_u64()).ln() < log_ratio {
                return (x, -self.s * x + self.lambda);
            }
        }
    }
}

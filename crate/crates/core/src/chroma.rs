//! Two-component fixed-bed column with a bi-Langmuir isotherm.
//!
//! The mass balance
//!
//! ```text
//! dC_i/dt + F dq_i/dt + u dC_i/dx = D_a d2C_i/dx2,   x in [0, L]
//! u C_i(0,t) - D_a dC_i/dx(0,t) = u h_i(t),          dC_i/dx(L,t) = 0
//! ```
//!
//! is discretized with finite volumes. Because `dq/dt = J_q(C) dC/dt`, each
//! cell advances `(I + F J_q(C)) dC/dt = D_a C_xx - u C_x`, eliminating the
//! stationary phase through a local 2x2 solve. The inlet face carries the
//! Danckwerts flux `u h(t)` exactly, with `h` averaged over each step so the
//! injected mass does not depend on the step size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ParameterVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvectionScheme {
    /// First-order upwind faces, forward Euler in time.
    Upwind,
    /// Koren-limited MUSCL faces, two-stage strong-stability-preserving
    /// Runge-Kutta in time.
    #[default]
    Koren,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnConfig {
    pub velocity_cm_per_s: f64,
    pub length_cm: f64,
    pub phase_ratio: f64,
    pub diffusion_cm2_per_s: f64,
    /// End of the recording window.
    pub horizon_s: f64,
    /// Rectangular injection concentrations `(h_1, h_2)`.
    pub injection_mm: [f64; 2],
    pub injection_duration_s: f64,
    /// Uniform initial concentrations `g_i(x)`.
    pub initial_mm: [f64; 2],
    pub cells: usize,
    /// Fraction of the explicit stability bound used as the time step.
    pub cfl: f64,
    /// Explicit time step; derived from `cfl` when absent.
    pub time_step_s: Option<f64>,
    pub scheme: ConvectionScheme,
}

impl ColumnConfig {
    /// Column used for the cyclohexanone/cycloheptanone experiment, recorded
    /// over `[0, 750]` s.
    pub fn experiment() -> Self {
        Self {
            velocity_cm_per_s: 0.125,
            length_cm: 15.0,
            phase_ratio: 0.7806,
            diffusion_cm2_per_s: 0.000_104_17,
            horizon_s: 750.0,
            injection_mm: [5.0, 0.0],
            injection_duration_s: 2.0,
            initial_mm: [0.0, 0.0],
            cells: 200,
            cfl: 0.8,
            time_step_s: None,
            scheme: ConvectionScheme::Koren,
        }
    }

    /// The same column with the horizon set to `1.5 T0`.
    pub fn short_horizon() -> Self {
        let mut c = Self::experiment();
        c.horizon_s = 1.5 * c.dead_time();
        c
    }

    pub fn dead_time(&self) -> f64 {
        self.length_cm / self.velocity_cm_per_s
    }

    pub fn dx(&self) -> f64 {
        self.length_cm / self.cells as f64
    }

    /// Largest stable explicit step: `dt (u/dx + 2 D_a/dx^2) <= 1`.
    pub fn stability_bound(&self) -> f64 {
        let dx = self.dx();
        1.0 / (self.velocity_cm_per_s / dx + 2.0 * self.diffusion_cm2_per_s / (dx * dx))
    }

    pub fn time_step(&self) -> f64 {
        self.time_step_s.unwrap_or_else(|| self.cfl * self.stability_bound())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("velocity", self.velocity_cm_per_s),
            ("length", self.length_cm),
            ("diffusion", self.diffusion_cm2_per_s),
            ("horizon", self.horizon_s),
            ("injection duration", self.injection_duration_s),
            ("cfl", self.cfl),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.phase_ratio >= 0.0) {
            return Err(Error::InvalidConfig("phase ratio must be >= 0".into()));
        }
        if self.cells < 3 {
            return Err(Error::InvalidConfig("need at least 3 cells".into()));
        }
        if self.injection_mm.iter().chain(&self.initial_mm).any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidConfig("concentrations must be >= 0".into()));
        }
        let dt = self.time_step();
        let bound = self.stability_bound();
        if !(dt > 0.0) || dt > bound {
            return Err(Error::StabilityViolation { dt, bound });
        }
        Ok(())
    }

    fn injection_average(&self, t0: f64, t1: f64, comp: usize) -> f64 {
        let overlap = (t1.min(self.injection_duration_s) - t0.max(0.0)).max(0.0);
        self.injection_mm[comp] * overlap / (t1 - t0)
    }
}

/// Bi-Langmuir coefficients. Site I and site II each have their own
/// saturation coefficients for both components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IsothermParams {
    pub a_i1: f64,
    pub a_ii1: f64,
    pub b_i1: f64,
    pub b_ii1: f64,
    pub a_i2: f64,
    pub a_ii2: f64,
    pub b_i2: f64,
    pub b_ii2: f64,
}

impl IsothermParams {
    /// `(a_I1, a_II1, b_I1, b_II1[, a_I2, a_II2, b_I2, b_II2])`; a 4-vector
    /// leaves the second component silent.
    pub fn from_xi(xi: &ParameterVector) -> Result<Self> {
        let x = xi.as_slice();
        let second = match x.len() {
            4 => [0.0; 4],
            8 => [x[4], x[5], x[6], x[7]],
            n => return Err(Error::DimensionMismatch { expected: 8, got: n }),
        };
        Ok(Self {
            a_i1: x[0],
            a_ii1: x[1],
            b_i1: x[2],
            b_ii1: x[3],
            a_i2: second[0],
            a_ii2: second[1],
            b_i2: second[2],
            b_ii2: second[3],
        })
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a_i1, self.a_ii1, self.b_i1, self.b_ii1, self.a_i2, self.a_ii2, self.b_i2, self.b_ii2,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::DomainViolation(
                "isotherm coefficients must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Stationary-phase concentrations `(q_1, q_2)`.
pub fn bilangmuir_q(c1: f64, c2: f64, p: &IsothermParams) -> (f64, f64) {
    let den_i = 1.0 + p.b_i1 * c1 + p.b_i2 * c2;
    let den_ii = 1.0 + p.b_ii1 * c1 + p.b_ii2 * c2;
    (
        p.a_i1 * c1 / den_i + p.a_ii1 * c1 / den_ii,
        p.a_i2 * c2 / den_i + p.a_ii2 * c2 / den_ii,
    )
}

/// `J[i][j] = dq_i/dC_j`.
pub fn bilangmuir_jacobian(c1: f64, c2: f64, p: &IsothermParams) -> [[f64; 2]; 2] {
    let den_i = 1.0 + p.b_i1 * c1 + p.b_i2 * c2;
    let den_ii = 1.0 + p.b_ii1 * c1 + p.b_ii2 * c2;
    let sq_i = den_i * den_i;
    let sq_ii = den_ii * den_ii;
    [
        [
            p.a_i1 * (den_i - p.b_i1 * c1) / sq_i + p.a_ii1 * (den_ii - p.b_ii1 * c1) / sq_ii,
            -p.a_i1 * c1 * p.b_i2 / sq_i - p.a_ii1 * c1 * p.b_ii2 / sq_ii,
        ],
        [
            -p.a_i2 * c2 * p.b_i1 / sq_i - p.a_ii2 * c2 * p.b_ii1 / sq_ii,
            p.a_i2 * (den_i - p.b_i2 * c2) / sq_i + p.a_ii2 * (den_ii - p.b_ii2 * c2) / sq_ii,
        ],
    ]
}

/// Outlet concentrations on the solver's native time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSolution {
    pub times: Vec<f64>,
    pub outlet: [Vec<f64>; 2],
    /// Space-time snapshots `(t, C_1(x), C_2(x))`, when requested.
    pub field: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl ColumnSolution {
    /// Total outlet response `C_1 + C_2` linearly interpolated onto `grid`.
    pub fn response_on(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let last = *self.times.last().unwrap_or(&0.0);
        grid.iter()
            .map(|&t| {
                if t < 0.0 || t > last {
                    return Err(Error::DomainViolation(format!(
                        "time {t} outside the solved interval [0, {last}]"
                    )));
                }
                let dt = self.times[1] - self.times[0];
                let k = ((t / dt).floor() as usize).min(self.times.len() - 2);
                let w = ((t - self.times[k]) / dt).clamp(0.0, 1.0);
                let at = |i: usize| self.outlet[0][i] + self.outlet[1][i];
                Ok((1.0 - w) * at(k) + w * at(k + 1))
            })
            .collect()
    }
}

struct Workspace {
    n: usize,
    inv_dx: f64,
    u: f64,
    d: f64,
    f: f64,
    scheme: ConvectionScheme,
    flux: Vec<f64>,
    div: [Vec<f64>; 2],
}

impl Workspace {
    /// Writes `D_a C_xx - u C_x` (flux form) for one component on the cells
    /// `lo..hi`.
    fn transport(&mut self, c: &[f64], inlet: f64, comp: usize, lo: usize, hi: usize) {
        let n = self.n;
        let (u, d_dx, inv_dx) = (self.u, self.d * self.inv_dx, self.inv_dx);
        let flux = &mut self.flux;
        let koren = self.scheme == ConvectionScheme::Koren;
        // Face j sits between cells j - 1 and j; the inlet acts as cell -1
        // and the outlet mirrors the last cell.
        let face = |j: usize| -> f64 {
            let i = j - 1;
            let ci = c[i];
            let upwind = if koren {
                let prev = if i == 0 { inlet } else { c[i - 1] };
                let next = if j < n { c[j] } else { ci };
                ci + 0.5 * koren_slope(ci - prev, next - ci)
            } else {
                ci
            };
            let diffusive = if j < n { -d_dx * (c[j] - ci) } else { 0.0 };
            u * upwind + diffusive
        };
        let first = lo.max(2);
        let last = hi.min(n - 1);
        for j in lo..first.min(hi + 1) {
            flux[j] = if j == 0 { u * inlet } else { face(j) };
        }
        if koren {
            for j in first..=last {
                let (cp, ci, cn) = (c[j - 2], c[j - 1], c[j]);
                let upwind = ci + 0.5 * koren_slope(ci - cp, cn - ci);
                flux[j] = u * upwind - d_dx * (cn - ci);
            }
        } else {
            for j in first..=last {
                flux[j] = u * c[j - 1] - d_dx * (c[j] - c[j - 1]);
            }
        }
        for j in (last + 1).max(first)..=hi {
            flux[j] = face(j);
        }
        let out = &mut self.div[comp][lo..hi];
        for (o, w) in out.iter_mut().zip(flux[lo..=hi].windows(2)) {
            *o = -(w[1] - w[0]) * inv_dx;
        }
    }

    /// Solves `(I + F J) dC/dt = div` in place of `div` on the cells `lo..hi`.
    fn eliminate(&mut self, c1: &[f64], c2: &[f64], p: &IsothermParams, two: bool, lo: usize, hi: usize) {
        let f = self.f;
        let [div1, div2] = &mut self.div;
        for i in lo..hi {
            let x1 = c1[i].max(0.0);
            if two {
                let x2 = c2[i].max(0.0);
                let j = bilangmuir_jacobian(x1, x2, p);
                let m11 = 1.0 + f * j[0][0];
                let m12 = f * j[0][1];
                let m21 = f * j[1][0];
                let m22 = 1.0 + f * j[1][1];
                let det = m11 * m22 - m12 * m21;
                let (r1, r2) = (div1[i], div2[i]);
                div1[i] = (m22 * r1 - m12 * r2) / det;
                div2[i] = (m11 * r2 - m21 * r1) / det;
            } else {
                // 1 + F (a_I / s_I + a_II / s_II) over a common denominator.
                let s_i = (1.0 + p.b_i1 * x1).powi(2);
                let s_ii = (1.0 + p.b_ii1 * x1).powi(2);
                let both = s_i * s_ii;
                div1[i] *= both / (both + f * (p.a_i1 * s_ii + p.a_ii1 * s_i));
            }
        }
    }
}

/// Concentrations at or below this are treated as settled: cells farther
/// than the stencil reach from any larger value are not updated.
const ACTIVE_THRESHOLD: f64 = 1e-16;

/// Stencil reach of one explicit step (two stages of the widest scheme).
const ACTIVE_MARGIN: usize = 4;

/// Range of cells to update this step, or `None` when nothing moves.
fn active_range(c1: &[f64], c2: &[f64], scale: f64, injecting: bool) -> Option<(usize, usize)> {
    let tiny = ACTIVE_THRESHOLD * scale;
    let live = |i: &usize| c1[*i].abs() > tiny || c2[*i].abs() > tiny;
    let n = c1.len();
    let first = (0..n).find(live);
    let last = (0..n).rev().find(live);
    let (lo, hi) = match (first, last) {
        (Some(a), Some(b)) => (a.saturating_sub(ACTIVE_MARGIN), (b + ACTIVE_MARGIN + 1).min(n)),
        _ if injecting => (0, 0),
        _ => return None,
    };
    let lo = if injecting { 0 } else { lo };
    let hi = if injecting { hi.max(ACTIVE_MARGIN.min(n)) } else { hi };
    Some((lo, hi))
}

/// `phi(r) * d_back` for the Koren limiter with `r = d_fwd / d_back`,
/// written without the division.
#[inline]
fn koren_slope(d_back: f64, d_fwd: f64) -> f64 {
    if d_back > 0.0 {
        (2.0 * d_fwd)
            .min((d_back + 2.0 * d_fwd) / 3.0)
            .min(2.0 * d_back)
            .max(0.0)
    } else if d_back < 0.0 {
        (2.0 * d_fwd)
            .max((d_back + 2.0 * d_fwd) / 3.0)
            .max(2.0 * d_back)
            .min(0.0)
    } else {
        0.0
    }
}

/// Integrates the column up to `until` (at most the configured horizon).
/// `record_every` stores a space-time snapshot every that many steps.
pub fn solve_column_until(
    config: &ColumnConfig,
    p: &IsothermParams,
    until: f64,
    record_every: Option<usize>,
) -> Result<ColumnSolution> {
    config.validate()?;
    p.validate()?;
    let end = until.min(config.horizon_s);
    let n = config.cells;
    let dt = config.time_step();
    let steps = ((end / dt).ceil() as usize).max(1);

    let two = config.injection_mm[1] > 0.0 || config.initial_mm[1] > 0.0;
    let mut ws = Workspace {
        n,
        inv_dx: 1.0 / config.dx(),
        u: config.velocity_cm_per_s,
        d: config.diffusion_cm2_per_s,
        f: config.phase_ratio,
        scheme: config.scheme,
        flux: vec![0.0; n + 1],
        div: [vec![0.0; n], vec![0.0; n]],
    };
    let mut c1 = vec![config.initial_mm[0]; n];
    let mut c2 = vec![config.initial_mm[1]; n];
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let scale = config
        .injection_mm
        .iter()
        .chain(&config.initial_mm)
        .fold(0.0, |m: f64, v| m.max(*v));

    let mut times = Vec::with_capacity(steps + 1);
    let mut out1 = Vec::with_capacity(steps + 1);
    let mut out2 = Vec::with_capacity(steps + 1);
    let mut field = Vec::new();
    times.push(0.0);
    out1.push(c1[n - 1].max(0.0));
    out2.push(c2[n - 1].max(0.0));
    if record_every.is_some() {
        field.push((0.0, c1.clone(), c2.clone()));
    }

    for k in 0..steps {
        let t0 = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        let h1 = config.injection_average(t0, t1, 0);
        let h2 = config.injection_average(t0, t1, 1);
        let injecting = h1 > 0.0 || h2 > 0.0;

        if let Some((lo, hi)) = active_range(&c1, &c2, scale, injecting) {
            ws.transport(&c1, h1, 0, lo, hi);
            if two {
                ws.transport(&c2, h2, 1, lo, hi);
            }
            ws.eliminate(&c1, &c2, p, two, lo, hi);
            match config.scheme {
                ConvectionScheme::Upwind => {
                    for i in lo..hi {
                        c1[i] += dt * ws.div[0][i];
                    }
                    if two {
                        for i in lo..hi {
                            c2[i] += dt * ws.div[1][i];
                        }
                    }
                }
                ConvectionScheme::Koren => {
                    // Cells outside the window keep their value in both stages.
                    s1.copy_from_slice(&c1);
                    for i in lo..hi {
                        s1[i] += dt * ws.div[0][i];
                    }
                    if two {
                        s2.copy_from_slice(&c2);
                        for i in lo..hi {
                            s2[i] += dt * ws.div[1][i];
                        }
                    }
                    ws.transport(&s1, h1, 0, lo, hi);
                    if two {
                        ws.transport(&s2, h2, 1, lo, hi);
                    }
                    ws.eliminate(&s1, &s2, p, two, lo, hi);
                    for i in lo..hi {
                        c1[i] = 0.5 * (c1[i] + s1[i] + dt * ws.div[0][i]);
                    }
                    if two {
                        for i in lo..hi {
                            c2[i] = 0.5 * (c2[i] + s2[i] + dt * ws.div[1][i]);
                        }
                    }
                }
            }
        }

        let o1 = c1[n - 1];
        let o2 = c2[n - 1];
        if !o1.is_finite() || !o2.is_finite() {
            return Err(Error::NonFiniteState { time: t1 });
        }
        times.push(t1);
        out1.push(o1.max(0.0));
        out2.push(o2.max(0.0));
        if let Some(every) = record_every {
            if every > 0 && (k + 1) % every == 0 {
                field.push((t1, c1.clone(), c2.clone()));
            }
        }
    }
    if c1.iter().chain(&c2).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { time: end });
    }
    Ok(ColumnSolution {
        times,
        outlet: [out1, out2],
        field,
    })
}

/// Solves over the full recording window.
pub fn solve_column(config: &ColumnConfig, p: &IsothermParams) -> Result<ColumnSolution> {
    solve_column_until(config, p, config.horizon_s, None)
}

/// `R(xi, t) = C_1(L, t) + C_2(L, t)` on `grid`, which must lie in
/// `[0, horizon]`.
pub fn chroma_signal(config: &ColumnConfig, xi: &ParameterVector, grid: &[f64]) -> Result<Vec<f64>> {
    let p = IsothermParams::from_xi(xi)?;
    let until = grid.iter().copied().fold(0.0, f64::max);
    if until > config.horizon_s {
        return Err(Error::DomainViolation(format!(
            "grid extends to {until} beyond the horizon {}",
            config.horizon_s
        )));
    }
    solve_column_until(config, &p, until, None)?.response_on(grid)
}

/// Column forward model with a fixed configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChromaModel {
    pub column: ColumnConfig,
    /// 4 for a single silent second component, 8 for both.
    pub dimension: usize,
}

impl ChromaModel {
    pub fn new(column: ColumnConfig, dimension: usize) -> Result<Self> {
        column.validate()?;
        if dimension != 4 && dimension != 8 {
            return Err(Error::InvalidConfig(format!(
                "chromatography model has 4 or 8 parameters, not {dimension}"
            )));
        }
        Ok(Self { column, dimension })
    }

    pub fn evaluate(&self, xi: &ParameterVector, grid: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: xi.len(),
            });
        }
        chroma_signal(&self.column, xi, grid)
    }
}

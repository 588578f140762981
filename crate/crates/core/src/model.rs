//! Physical constants, drive profiles, time grids and admissibility checks.

use crate::error::{Error, Result};

/// Oscillator, bath and radiation constants.
///
/// `beta_bb = f64::INFINITY` selects a zero-temperature radiation field.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    pub m: f64,
    pub omega0: f64,
    pub hbar: f64,
    pub kb: f64,
    pub beta_tb: f64,
    pub beta_bb: f64,
    pub gamma_tb: f64,
    pub omega_cut_tb: f64,
    pub tau_bb: f64,
    pub omega_cut_bb: f64,
    pub bb_enabled: bool,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            m: 1.0,
            omega0: 1.0,
            hbar: 1.0,
            kb: 1.0,
            beta_tb: 1.0,
            beta_bb: 1.0,
            gamma_tb: 0.1,
            omega_cut_tb: 10.0,
            tau_bb: 1e-3,
            omega_cut_bb: 10.0,
            bb_enabled: false,
        }
    }
}

impl PhysicalParams {
    /// M = m/(1 − τ_BB Ω_BB); infinite or negative when the causality bound fails.
    pub fn renormalized_mass(&self) -> f64 {
        if !self.bb_active() {
            return self.m;
        }
        self.m / (1.0 - self.tau_bb * self.omega_cut_bb)
    }

    /// Radiation coupling is switched on and nonzero.
    pub fn bb_active(&self) -> bool {
        self.bb_enabled && self.tau_bb > 0.0
    }

    /// ħβ_TB.
    pub fn hbar_beta(&self) -> f64 {
        self.hbar * self.beta_tb
    }

    /// Spacing of the thermal-bath Matsubara frequencies, 2π/(ħβ_TB).
    pub fn matsubara_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.hbar_beta()
    }

    pub fn kt(&self) -> f64 {
        1.0 / self.beta_tb
    }
}

/// A scalar time profile.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    /// amplitude · sin(frequency · s + phase)
    Harmonic { amplitude: f64, frequency: f64, phase: f64 },
    /// amplitude · exp(−(s − center)²/(2 width²)) · sin(carrier · (s − center) + phase)
    GaussianPulse { amplitude: f64, center: f64, width: f64, carrier: f64, phase: f64 },
    /// Linear interpolation between knots sorted by time; constant beyond the ends.
    Tabulated { knots: Vec<(f64, f64)> },
}

impl Profile {
    pub fn tabulated(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Input("tabulated profile has no samples".into()));
        }
        if knots.iter().any(|(s, v)| !s.is_finite() || !v.is_finite()) {
            return Err(Error::Input("tabulated profile has non-finite samples".into()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Input("tabulated profile has repeated abscissae".into()));
        }
        Ok(Profile::Tabulated { knots })
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Harmonic { amplitude, frequency, phase } => amplitude * (frequency * s + phase).sin(),
            Profile::GaussianPulse { amplitude, center, width, carrier, phase } => {
                let x = s - center;
                amplitude * (-0.5 * x * x / (width * width)).exp() * (carrier * x + phase).sin()
            }
            Profile::Tabulated { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if s <= first.0 {
                    return first.1;
                }
                if s >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|k| k.0 <= s) - 1;
                let (s0, v0) = knots[i];
                let (s1, v1) = knots[i + 1];
                if s == s0 {
                    return v0;
                }
                v0 + (v1 - v0) * (s - s0) / (s1 - s0)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Harmonic { amplitude, .. } | Profile::GaussianPulse { amplitude, .. } => *amplitude == 0.0,
            Profile::Tabulated { knots } => knots.iter().all(|k| k.1 == 0.0),
        }
    }

    /// Highest angular frequency the profile carries, for the resolution guard.
    pub fn max_frequency(&self) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Harmonic { frequency, .. } => frequency.abs(),
            Profile::GaussianPulse { width, carrier, .. } => carrier.abs() + 3.0 / width.abs(),
            Profile::Tabulated { knots } => knots
                .windows(2)
                .map(|w| std::f64::consts::PI / (w[1].0 - w[0].0))
                .fold(0.0, f64::max),
        }
    }
}

/// Parametric modulation ω_P²(s) and laser force E_L(s).
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSpec {
    pub omega_p2: Profile,
    pub e_laser: Profile,
}

impl Default for DriveSpec {
    fn default() -> Self {
        DriveSpec { omega_p2: Profile::Zero, e_laser: Profile::Zero }
    }
}

impl DriveSpec {
    /// ω²(s) = ω₀² + ω_P²(s).
    pub fn omega2(&self, p: &PhysicalParams, s: f64) -> f64 {
        p.omega0 * p.omega0 + self.omega_p2.eval(s)
    }
}

/// How the oscillator is prepared at t = 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialState {
    /// System and thermal bath jointly in the Gibbs state of the full Hamiltonian.
    #[default]
    Correlated,
    /// Product of a Gaussian system state with uncorrelated bath equilibrium.
    Factorized { mean_q: f64, mean_p: f64, sqq: f64, spp: f64 },
}

/// Uniform grid s_i = i·h on [0, t_max] with the indices at which moments are reported.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_steps: usize,
    pub snapshots: Vec<usize>,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) || n_steps == 0 {
            return Err(Error::Input(format!("time grid needs t_max > 0 and n_steps > 0 (got {t_max}, {n_steps})")));
        }
        Ok(TimeGrid { t_max, n_steps, snapshots: vec![n_steps] })
    }

    /// Grid with `count` evenly spaced snapshots, the last at t_max.
    pub fn with_snapshot_count(t_max: f64, n_steps: usize, count: usize) -> Result<Self> {
        let mut g = TimeGrid::new(t_max, n_steps)?;
        let count = count.clamp(1, n_steps);
        g.snapshots = (1..=count).map(|k| (k * n_steps) / count).collect();
        g.snapshots.dedup();
        Ok(g)
    }

    pub fn with_snapshots(mut self, mut snapshots: Vec<usize>) -> Result<Self> {
        snapshots.sort_unstable();
        snapshots.dedup();
        if let Some(&bad) = snapshots.iter().find(|&&k| k > self.n_steps) {
            return Err(Error::Input(format!("snapshot index {bad} exceeds n_steps {}", self.n_steps)));
        }
        self.snapshots = snapshots;
        Ok(self)
    }

    pub fn h(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Warning text when h·max(ω₀, Ω_TB, Ω_BB, drive frequencies) exceeds 0.2.
    pub fn resolution_warning(&self, p: &PhysicalParams, d: &DriveSpec) -> Option<String> {
        let mut fmax = p.omega0;
        if p.gamma_tb > 0.0 {
            fmax = fmax.max(p.omega_cut_tb);
        }
        if p.bb_active() {
            fmax = fmax.max(p.omega_cut_bb);
        }
        fmax = fmax.max(d.omega_p2.max_frequency()).max(d.e_laser.max_frequency());
        let x = self.h() * fmax;
        (x > 0.2).then(|| format!("coarse grid: h*max_frequency = {x:.3} exceeds 0.2"))
    }
}

/// Outcome of [`validate_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub violations: Vec<String>,
    pub renormalized_mass: f64,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<f64> {
        if self.is_valid() {
            Ok(self.renormalized_mass)
        } else {
            Err(Error::Physics(self.violations))
        }
    }
}

fn profile_violations(name: &str, prof: &Profile, out: &mut Vec<String>) {
    let scale = match prof {
        Profile::Zero => 0.0,
        Profile::Harmonic { amplitude, .. } | Profile::GaussianPulse { amplitude, .. } => amplitude.abs(),
        Profile::Tabulated { knots } => knots.iter().map(|k| k.1.abs()).fold(0.0, f64::max),
    };
    let v0 = prof.eval(0.0);
    if v0.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        out.push(format!("drive must vanish at t=0: {name}(0) = {v0:e}"));
    }
    if let Profile::GaussianPulse { width, .. } = prof {
        if !(*width > 0.0) {
            out.push(format!("{name}: pulse width must be positive"));
        }
    }
}

/// Lists every violated admissibility condition; empty means valid.
pub fn validate_params(p: &PhysicalParams, d: &DriveSpec) -> Validation {
    let mut v = Vec::new();
    let positive = [("m", p.m), ("omega0", p.omega0), ("hbar", p.hbar), ("kB", p.kb), ("betaTB", p.beta_tb), ("betaBB", p.beta_bb)];
    for (name, x) in positive {
        if !(x > 0.0) || x.is_nan() {
            v.push(format!("{name} must be > 0 (got {x})"));
        }
    }
    if p.beta_tb.is_infinite() {
        v.push("betaTB must be finite".into());
    }
    if !(p.gamma_tb >= 0.0) || !p.gamma_tb.is_finite() {
        v.push(format!("gammaTB must be >= 0 (got {})", p.gamma_tb));
    }
    if p.gamma_tb > 0.0 && !(p.omega_cut_tb > 0.0 && p.omega_cut_tb.is_finite()) {
        v.push(format!("OmegaCutTB must be > 0 (got {})", p.omega_cut_tb));
    }
    if p.gamma_tb > 0.0 && p.omega_cut_tb > 1e3 * p.omega0 {
        v.push(format!("OmegaCutTB = {} exceeds 1e3*omega0; rescale units", p.omega_cut_tb));
    }
    if !(p.tau_bb >= 0.0) || !p.tau_bb.is_finite() {
        v.push(format!("tauBB must be >= 0 (got {})", p.tau_bb));
    }
    if p.bb_enabled {
        if !(p.omega_cut_bb > 0.0 && p.omega_cut_bb.is_finite()) {
            v.push(format!("OmegaCutBB must be > 0 (got {})", p.omega_cut_bb));
        }
        if p.tau_bb * p.omega_cut_bb >= 1.0 {
            v.push(format!(
                "bare mass negative / causality bound: tauBB*OmegaCutBB = {} must be < 1",
                p.tau_bb * p.omega_cut_bb
            ));
        }
    }
    profile_violations("omegaP2", &d.omega_p2, &mut v);
    profile_violations("eLaser", &d.e_laser, &mut v);
    Validation { violations: v, renormalized_mass: p.renormalized_mass() }
}

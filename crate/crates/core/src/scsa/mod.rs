//! Semi-classical signal analysis.
//!
//! A non-negative signal `y(t)` is used as the (attractive) potential of
//! the operator `H = -h² d²/dt² - y(t)`. Its negative eigenvalues
//! `λ_n = -κ_n²` and L²-normalized eigenfunctions `ψ_n` give the
//! reconstruction `y_h(t) = 4h Σ κ_n ψ_n²(t)`; each term of that sum is one
//! Schrödinger component.
//!
//! The second derivative is discretized with the three-point central
//! difference on the sample grid (`dt = 1/fs`) with zero Dirichlet
//! boundaries, so `H` is symmetric tridiagonal.

pub mod tridiag;

use thiserror::Error;

use crate::Matrix;
pub use tridiag::SymTridiagonal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScsaError {
    #[error("semi-classical parameter must be positive, got {0}")]
    NonPositiveH(f64),
    #[error("signal needs at least 2 samples, got {0}")]
    SignalTooShort(usize),
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("sampling rate must be positive and finite, got {0}")]
    NonPositiveRate(f64),
    #[error("tridiagonal eigensolver did not converge at index {index}")]
    EigenSolverNoConvergence { index: usize },
    #[error("only {found} negative eigenvalues, {requested} requested")]
    InsufficientSpectrum { found: usize, requested: usize },
    #[error("decomposition depth must be at least 1")]
    ZeroDepth,
}

impl ScsaError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NonPositiveH(_) => "NonPositiveH",
            Self::SignalTooShort(_) => "SignalTooShort",
            Self::NonFiniteSample { .. } => "NonFiniteSample",
            Self::NonPositiveRate(_) => "NonPositiveRate",
            Self::EigenSolverNoConvergence { .. } => "EigenSolverNoConvergence",
            Self::InsufficientSpectrum { .. } => "InsufficientSpectrum",
            Self::ZeroDepth => "ZeroDepth",
        }
    }
}

/// A sampled waveform with its sampling rate in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self, ScsaError> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(ScsaError::NonPositiveRate(fs));
        }
        if samples.len() < 2 {
            return Err(ScsaError::SignalTooShort(samples.len()));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(ScsaError::NonFiniteSample { index });
        }
        Ok(Self { samples, fs })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Bound states of the operator at a given `h`.
///
/// `kappas` are sorted descending (most bound first) and row `n` of
/// `eigenfunctions` holds `ψ_n` on the signal grid, scaled so that
/// `Σ ψ_n(t)² dt = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchrodingerSpectrum {
    pub h: f64,
    pub dt: f64,
    pub kappas: Vec<f64>,
    pub eigenfunctions: Matrix,
}

impl SchrodingerSpectrum {
    /// Number of negative eigenvalues, `N_h`.
    pub fn count(&self) -> usize {
        self.kappas.len()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.kappas.iter().map(|k| -k * k).collect()
    }
}

/// Schrödinger components `4 h κ_n ψ_n²` (one per row) and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStack {
    pub components: Matrix,
    pub h: f64,
    pub kappas: Vec<f64>,
    pub reconstruction: Vec<f64>,
}

/// Assembles `H = -h² D₂ - diag(y)` on the grid `dt = 1/fs`.
pub fn build_operator(signal: &Signal, h: f64) -> Result<SymTridiagonal, ScsaError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(ScsaError::NonPositiveH(h));
    }
    let l = signal.len();
    if l < 2 {
        return Err(ScsaError::SignalTooShort(l));
    }
    let dt = signal.dt();
    let kinetic = h * h / (dt * dt);
    let diag = signal.samples().iter().map(|y| 2.0 * kinetic - y).collect();
    let off = vec![-kinetic; l - 1];
    Ok(SymTridiagonal::new(diag, off))
}

/// Solves the eigenvalue problem of `op` and keeps the bound states.
pub fn solve_negative_spectrum(
    op: &SymTridiagonal,
    h: f64,
    dt: f64,
) -> Result<SchrodingerSpectrum, ScsaError> {
    let l = op.dim();
    let eig = tridiag::eigenvalues(op)?;
    // Ascending order puts the most negative (largest κ) first.
    let n_neg = eig.iter().take_while(|&&v| v < 0.0).count();
    let vectors = tridiag::eigenvectors(op, &eig, n_neg)?;

    let weight = 1.0 / dt.sqrt();
    let mut eigenfunctions = Matrix::zeros(n_neg, l);
    for (n, v) in vectors.iter().enumerate() {
        // `v` has unit Euclidean norm; rescale for Σ ψ² dt = 1.
        for (dst, src) in eigenfunctions.row_mut(n).iter_mut().zip(v) {
            *dst = src * weight;
        }
    }
    let kappas = eig[..n_neg].iter().map(|&lam| (-lam).sqrt()).collect();
    Ok(SchrodingerSpectrum {
        h,
        dt,
        kappas,
        eigenfunctions,
    })
}

/// Full forward decomposition: operator, spectrum and the first `n_h`
/// components with their row-sum reconstruction.
///
/// A constant signal is refused with `InsufficientSpectrum { found: 0 }`:
/// its only bound states are those of the Dirichlet box, which say nothing
/// about the signal.
pub fn scsa_reconstruction(
    h: f64,
    signal: &Signal,
    n_h: usize,
) -> Result<ComponentStack, ScsaError> {
    if n_h == 0 {
        return Err(ScsaError::ZeroDepth);
    }
    let first = signal.samples()[0];
    if signal.samples().iter().all(|&v| v == first) {
        return Err(ScsaError::InsufficientSpectrum {
            found: 0,
            requested: n_h,
        });
    }
    let op = build_operator(signal, h)?;
    let spectrum = solve_negative_spectrum(&op, h, signal.dt())?;
    components_from_spectrum(&spectrum, n_h)
}

/// Truncates a spectrum to its first `n_h` components.
pub fn components_from_spectrum(
    spectrum: &SchrodingerSpectrum,
    n_h: usize,
) -> Result<ComponentStack, ScsaError> {
    if n_h == 0 {
        return Err(ScsaError::ZeroDepth);
    }
    let found = spectrum.count();
    if found < n_h {
        return Err(ScsaError::InsufficientSpectrum {
            found,
            requested: n_h,
        });
    }
    let l = spectrum.eigenfunctions.cols();
    let h = spectrum.h;
    let mut components = Matrix::zeros(n_h, l);
    let mut reconstruction = vec![0.0; l];
    for n in 0..n_h {
        let scale = 4.0 * h * spectrum.kappas[n];
        let psi = spectrum.eigenfunctions.row(n);
        for (t, (c, p)) in components.row_mut(n).iter_mut().zip(psi).enumerate() {
            *c = scale * p * p;
            reconstruction[t] += *c;
        }
    }
    Ok(ComponentStack {
        components,
        h,
        kappas: spectrum.kappas[..n_h].to_vec(),
        reconstruction,
    })
}

/// Signal on `[-half_width, half_width]` at spacing `dx`, `f(x)` sampled
/// at every grid point. Test potentials such as `A sech²(x)` use this.
pub fn sampled_on_grid(half_width: f64, dx: f64, f: impl Fn(f64) -> f64) -> Signal {
    let n = (2.0 * half_width / dx).round() as usize + 1;
    let samples = (0..n).map(|i| f(-half_width + i as f64 * dx)).collect();
    Signal::new(samples, 1.0 / dx).expect("grid signal is valid")
}

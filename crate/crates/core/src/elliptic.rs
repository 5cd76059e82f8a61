//! Discrete Brinkman solve `-sigma Lap_h W + W = p` on the periodic grid,
//! the associated fundamental kernel, mollifiers and periodic convolution.
//!
//! Everything is diagonal in the discrete Fourier basis: the operator acts
//! on mode `k` as `1 + sigma lambda_k` with
//! `lambda_k = sum_a (4 / dx^2) sin^2(pi k_a / N)`, the exact symbol of the
//! stencil in [`crate::calculus::laplacian`].

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::calculus::laplacian_symbol_1d;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Forward/inverse FFT pair for one grid, applied axis by axis.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            fwd: planner.plan_fft_forward(grid.n()),
            inv: planner.plan_fft_inverse(grid.n()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        // contiguous axis (the only one in 1D, the second in 2D)
        fft.process(data);
        if self.grid.dim() == 2 {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = data[i * n + j];
                }
                fft.process(&mut col);
                for i in 0..n {
                    data[i * n + j] = col[i];
                }
            }
        }
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.fwd);
        data
    }

    /// Inverse transform keeping the real part, normalized by `1 / N^d`.
    pub fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, &self.inv);
        let scale = 1.0 / self.grid.len() as f64;
        data.into_iter().map(|c| c.re * scale).collect()
    }

    /// `lambda_k` for every flat frequency index, in FFT ordering.
    pub fn laplacian_symbol(&self) -> Vec<f64> {
        let g = self.grid;
        let axis: Vec<f64> = (0..g.n()).map(|k| laplacian_symbol_1d(&g, k)).collect();
        (0..g.len())
            .map(|idx| {
                let [i, j] = g.unflatten(idx);
                if g.dim() == 1 {
                    axis[i]
                } else {
                    axis[i] + axis[j]
                }
            })
            .collect()
    }
}

const REFINE_CONDITION: f64 = 100.0;

/// Prepared solver for `-sigma Lap_h W + W = p` at fixed `sigma`.
#[derive(Debug, Clone)]
pub struct BrinkmanSolver {
    sigma: f64,
    spectral: Spectral,
    /// `1 / (1 + sigma lambda_k)` in FFT ordering.
    symbol: Vec<f64>,
}

impl BrinkmanSolver {
    pub fn new(grid: Grid, sigma: f64) -> Result<Self> {
        Self::with_spectral(Spectral::new(grid), sigma)
    }

    pub fn with_spectral(spectral: Spectral, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
        }
        let symbol = spectral
            .laplacian_symbol()
            .into_iter()
            .map(|lam| 1.0 / (1.0 + sigma * lam))
            .collect();
        Ok(Self {
            sigma,
            spectral,
            symbol,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Reciprocal symbol `1 / (1 + sigma lambda_k)`, FFT ordering.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Returns `W` with `-sigma Lap_h W + W = p`. For `sigma = 0` this is `p`.
    pub fn solve(&self, p: &Field) -> Result<Field> {
        if p.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        if let Some(index) = p.first_non_finite() {
            return Err(Error::NonFinite { index });
        }
        if self.sigma == 0.0 {
            return Ok(p.clone());
        }
        let mut w = self.apply_symbol(p.values());
        if self.needs_refinement() {
            // one step of iterative refinement against the stencil
            let wf = Field::from_raw(*self.grid(), w);
            let r = self.residual(&wf, p);
            let corr = self.apply_symbol(r.values());
            w = wf.into_values();
            for (wi, ci) in w.iter_mut().zip(corr) {
                *wi -= ci;
            }
        }
        Ok(Field::from_raw(*self.grid(), w))
    }

    /// Spectral roundoff is amplified by `sigma * max lambda`; above this
    /// condition number the solve is refined once.
    fn needs_refinement(&self) -> bool {
        let g = self.grid();
        self.sigma * 4.0 * g.dim() as f64 / (g.dx() * g.dx()) >= REFINE_CONDITION
    }

    fn apply_symbol(&self, values: &[f64]) -> Vec<f64> {
        let mut hat = self.spectral.forward(values);
        for (c, s) in hat.iter_mut().zip(&self.symbol) {
            *c *= *s;
        }
        self.spectral.inverse_real(hat)
    }

    /// `-sigma Lap_h W + W - p`, evaluated with the stencil.
    pub fn residual(&self, w: &Field, p: &Field) -> Field {
        let lap = crate::calculus::laplacian(w);
        let s = self.sigma;
        let lv = lap.values();
        let (wv, pv) = (w.values(), p.values());
        Field::from_raw(
            *w.grid(),
            (0..wv.len()).map(|i| -s * lv[i] + wv[i] - pv[i]).collect(),
        )
    }
}

/// Convenience wrapper building a one-off solver.
pub fn solve_brinkman(p: &Field, sigma: f64) -> Result<Field> {
    BrinkmanSolver::new(*p.grid(), sigma)?.solve(p)
}

/// Periodic kernel indexed by lattice offset: `values[idx]` is the weight at
/// the offset whose per-axis components are `grid.signed_offset` of the
/// unflattened index. The origin sits at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    grid: Grid,
    values: Vec<f64>,
}

impl DiscreteKernel {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Unit-mass delta at the origin.
    pub fn delta(grid: Grid) -> Self {
        let mut values = vec![0.0; grid.len()];
        values[0] = 1.0 / grid.cell_volume();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sum k_j dx^d`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Physical displacement of lattice offset `idx`.
    pub fn offset_position(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.grid.unflatten(idx);
        let dx = self.grid.dx();
        let x = self.grid.signed_offset(i) as f64 * dx;
        if self.grid.dim() == 1 {
            [x, 0.0]
        } else {
            [x, self.grid.signed_offset(j) as f64 * dx]
        }
    }

    /// Discrete `L^1` norm of the staggered gradient of the kernel.
    pub fn gradient_l1(&self) -> f64 {
        let f = Field::from_raw(self.grid, self.values.clone());
        let g = crate::calculus::gradient(&f);
        let s: f64 = g.axes().iter().flat_map(|a| a.iter()).map(|v| v.abs()).sum();
        s * self.grid.cell_volume()
    }

    /// Spectrum `dx^d * FFT(k)`, the multiplier of convolution by this kernel.
    pub fn multiplier(&self, spectral: &Spectral) -> Vec<Complex64> {
        let vol = self.grid.cell_volume();
        spectral
            .forward(&self.values)
            .into_iter()
            .map(|c| c * vol)
            .collect()
    }

    /// Composition `self * other` (periodic convolution of kernels).
    pub fn compose(&self, other: &DiscreteKernel) -> Result<DiscreteKernel> {
        let f = Field::from_raw(self.grid, self.values.clone());
        let c = convolve(&f, other)?;
        Ok(DiscreteKernel {
            grid: self.grid,
            values: c.into_values(),
        })
    }
}

/// Fundamental kernel `K_sigma` of the discrete Brinkman operator, i.e. the
/// inverse transform of `1 / (1 + sigma lambda_k)` scaled so that
/// `convolve(p, K_sigma) == solve_brinkman(p, sigma)`.
pub fn kernel_k_sigma(grid: Grid, sigma: f64) -> Result<DiscreteKernel> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("kernel needs sigma > 0, got {sigma}")));
    }
    let solver = BrinkmanSolver::new(grid, sigma)?;
    let vol = grid.cell_volume();
    let hat: Vec<Complex64> = solver
        .symbol()
        .iter()
        .map(|&s| Complex64::new(s / vol, 0.0))
        .collect();
    let spectral_values = solver.spectral().inverse_real(hat);
    Ok(DiscreteKernel {
        grid,
        values: jacobi_polish(grid, sigma, &spectral_values),
    })
}

/// One Jacobi sweep for `(1 - sigma Lap_h) K = delta / dx^d`, started from
/// the spectral kernel with roundoff negatives clipped. All terms of the
/// sweep are nonnegative, so the result is too; the sweep is a max-norm
/// contraction towards the exact (nonnegative) kernel, so it never moves
/// further from it.
fn jacobi_polish(grid: Grid, sigma: f64, k: &[f64]) -> Vec<f64> {
    let c = sigma / (grid.dx() * grid.dx());
    let diag = 1.0 + 2.0 * grid.dim() as f64 * c;
    let src = 1.0 / grid.cell_volume();
    (0..grid.len())
        .map(|i| {
            let mut nb = 0.0;
            for a in 0..grid.dim() {
                nb += k[grid.shift(i, a, 1)].max(0.0) + k[grid.shift(i, a, -1)].max(0.0);
            }
            let rhs = if i == 0 { src } else { 0.0 };
            (rhs + c * nb) / diag
        })
        .collect()
}

/// Standard bump `exp(-1 / (1 - r^2))` on `r < 1`.
pub fn bump_profile(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

/// Mollifier `omega_delta`: the bump of radius `delta` on lattice offsets,
/// renormalized to unit discrete mass. Radii that capture no neighbour
/// collapse to the discrete delta.
pub fn mollifier(grid: Grid, delta: f64) -> Result<DiscreteKernel> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    if delta <= grid.dx() {
        return Ok(DiscreteKernel::delta(grid));
    }
    let mut k = DiscreteKernel {
        grid,
        values: vec![0.0; grid.len()],
    };
    for idx in 0..grid.len() {
        let [x, y] = k.offset_position(idx);
        k.values[idx] = bump_profile((x * x + y * y).sqrt() / delta);
    }
    let mass = k.mass();
    for v in &mut k.values {
        *v /= mass;
    }
    Ok(k)
}

/// Periodic convolution `(f * k)_i = sum_j f_{i-j} k_j dx^d`.
pub fn convolve(f: &Field, k: &DiscreteKernel) -> Result<Field> {
    if f.grid() != k.grid() {
        return Err(Error::GridMismatch);
    }
    let spectral = Spectral::new(*f.grid());
    Ok(ConvolutionPlan::from_multiplier(spectral.clone(), k.multiplier(&spectral)).apply(f))
}

/// Reusable convolution by a fixed multiplier.
#[derive(Debug, Clone)]
pub struct ConvolutionPlan {
    spectral: Spectral,
    multiplier: Vec<Complex64>,
}

impl ConvolutionPlan {
    pub fn new(kernel: &DiscreteKernel) -> Self {
        let spectral = Spectral::new(*kernel.grid());
        let multiplier = kernel.multiplier(&spectral);
        Self::from_multiplier(spectral, multiplier)
    }

    pub fn from_multiplier(spectral: Spectral, multiplier: Vec<Complex64>) -> Self {
        Self {
            spectral,
            multiplier,
        }
    }

    /// Plan for `K_sigma * omega_delta`, built directly from the symbols.
    pub fn mollified_brinkman(grid: Grid, sigma: f64, delta: f64) -> Result<Self> {
        let solver = BrinkmanSolver::new(grid, sigma)?;
        let spectral = solver.spectral().clone();
        let moll = mollifier(grid, delta)?.multiplier(&spectral);
        let multiplier = moll
            .into_iter()
            .zip(solver.symbol())
            .map(|(m, &s)| m * s)
            .collect();
        Ok(Self::from_multiplier(spectral, multiplier))
    }

    pub fn apply(&self, f: &Field) -> Field {
        let mut hat = self.spectral.forward(f.values());
        for (c, m) in hat.iter_mut().zip(&self.multiplier) {
            *c *= *m;
        }
        Field::from_raw(*f.grid(), self.spectral.inverse_real(hat))
    }
}

//! Adaptation of the grid SDF to sampled ground-truth distances by Adam on
//! L = Σ_i (s(p_i) − sdf_i)², where s interpolates vertex values barycentrically
//! inside the containing tet. Offsets stay frozen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::sdf::SamplePoint;
use crate::tetra::pyramid::Pyramid;
pub use crate::tetra::pyramid::FieldParam;
use crate::tetra::TetGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub iters: usize,
    pub lr: f64,
    pub param: FieldParam,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            iters: 400,
            lr: 0.01,
            param: FieldParam::Spline {
                coarsest: 2,
                finest: 16,
                decay: 0.85,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Loss before each step; `losses.len() == iters`.
    pub losses: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// RMSE over the fitting samples after the last step.
    pub final_rmse: f64,
}

/// Containing tet and barycentric weights of each sample.
#[derive(Debug, Clone)]
pub struct Located {
    pub tets: Vec<[u32; 4]>,
    pub weights: Vec<[f64; 4]>,
}

pub fn locate_samples(grid: &TetGrid, samples: &[SamplePoint]) -> Result<Located> {
    let mut tets = Vec::with_capacity(samples.len());
    let mut weights = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let (t, w) = grid.locate(&s.p).ok_or(Error::OutOfBounds {
            index: i,
            x: s.p.x,
            y: s.p.y,
            z: s.p.z,
        })?;
        tets.push(grid.tets[t]);
        weights.push(w);
    }
    Ok(Located { tets, weights })
}

/// Eq. 2 loss and its gradient with respect to the vertex SDF values.
pub fn loss_and_grad(sdf: &[f64], loc: &Located, samples: &[SamplePoint]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; sdf.len()];
    let mut loss = 0.0;
    for ((tet, w), s) in loc.tets.iter().zip(&loc.weights).zip(samples) {
        let v: f64 = (0..4).map(|k| w[k] * sdf[tet[k] as usize]).sum();
        let r = v - s.sdf_gt;
        loss += r * r;
        for k in 0..4 {
            grad[tet[k] as usize] += 2.0 * r * w[k];
        }
    }
    (loss, grad)
}

pub fn loss(sdf: &[f64], loc: &Located, samples: &[SamplePoint]) -> f64 {
    loc.tets
        .iter()
        .zip(&loc.weights)
        .zip(samples)
        .map(|((tet, w), s)| {
            let v: f64 = (0..4).map(|k| w[k] * sdf[tet[k] as usize]).sum();
            (v - s.sdf_gt).powi(2)
        })
        .sum()
}

/// Root-mean-square interpolation error of the grid at `samples`.
pub fn rmse(grid: &TetGrid, samples: &[SamplePoint]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::validation("samples", "empty sample set"));
    }
    let loc = locate_samples(grid, samples)?;
    Ok((loss(&grid.sdf, &loc, samples) / samples.len() as f64).sqrt())
}

/// Fits with the default parameterization.
pub fn fit_sdf(grid: &mut TetGrid, samples: &[SamplePoint], iters: usize, lr: f64) -> Result<FitReport> {
    fit_sdf_with(
        grid,
        samples,
        &FitOptions {
            iters,
            lr,
            ..FitOptions::default()
        },
    )
}

pub fn fit_sdf_with(grid: &mut TetGrid, samples: &[SamplePoint], opts: &FitOptions) -> Result<FitReport> {
    if samples.is_empty() {
        return Err(Error::validation("samples", "empty sample set"));
    }
    if !(opts.lr > 0.0) {
        return Err(Error::validation("fit", format!("lr {} must be > 0", opts.lr)));
    }
    let loc = locate_samples(grid, samples)?;
    let pyramid = Pyramid::for_param(grid.resolution, &opts.param);
    let base = grid.sdf.clone();
    let mut coeffs = vec![0.0; pyramid.len()];
    let mut opt = Adam::new(coeffs.len(), opts.lr);
    let mut losses = Vec::with_capacity(opts.iters);
    for _ in 0..opts.iters {
        let (l, g) = loss_and_grad(&grid.sdf, &loc, samples);
        losses.push(l);
        let gc = pyramid.restrict(&g);
        opt.step(&mut coeffs, &gc)?;
        grid.sdf.copy_from_slice(&base);
        pyramid.prolong_add(&coeffs, &mut grid.sdf);
    }
    let final_loss = loss(&grid.sdf, &loc, samples);
    Ok(FitReport {
        initial_loss: losses.first().copied().unwrap_or(final_loss),
        losses,
        final_loss,
        final_rmse: (final_loss / samples.len() as f64).sqrt(),
    })
}

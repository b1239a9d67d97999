//! Combination of window posteriors into composite images.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::geometry::{ComplexImage, SceneGrid};
use crate::regularizers::RegularizerKind;
use crate::solver::SubAperturePosterior;

/// Real-valued image on a scene grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    grid: SceneGrid,
    values: Vec<f64>,
}

impl RealImage {
    pub fn new(grid: SceneGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                what: "real image",
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &SceneGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// All composite products of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeResult {
    pub max_image: ComplexImage,
    pub mean_image: ComplexImage,
    pub std_image: RealImage,
    /// Absent when the windows were formed with a non-identity regularizer.
    pub alpha_image: Option<RealImage>,
    pub windows: usize,
}

fn common_grid<'a, I>(grids: I) -> Result<SceneGrid>
where
    I: IntoIterator<Item = &'a SceneGrid>,
{
    let mut it = grids.into_iter();
    let first = *it.next().ok_or_else(|| Error::invalid("windows", "at least one window is required"))?;
    for g in it {
        if *g != first {
            return Err(Error::Dimension {
                what: "window grid",
                expected: first.len(),
                found: g.len(),
            });
        }
    }
    Ok(first)
}

/// Per pixel, the value of the window with the largest modulus; ties go to
/// the earliest window.
pub fn composite_max(means: &[&ComplexImage]) -> Result<ComplexImage> {
    let grid = common_grid(means.iter().map(|m| m.grid()))?;
    let mut out = means[0].values().to_vec();
    let mut best: Vec<f64> = out.iter().map(|v| v.norm()).collect();
    for m in &means[1..] {
        for ((o, b), v) in out.iter_mut().zip(best.iter_mut()).zip(m.values()) {
            let a = v.norm();
            if a > *b {
                *b = a;
                *o = *v;
            }
        }
    }
    ComplexImage::new(grid, out)
}

/// Average of the window means and `(1/L^2) sum diag(Sigma_l)`.
pub fn composite_mean(means: &[&ComplexImage], cov_diagonals: &[&[f64]]) -> Result<(ComplexImage, Vec<f64>)> {
    let grid = common_grid(means.iter().map(|m| m.grid()))?;
    if cov_diagonals.len() != means.len() {
        return Err(Error::Dimension {
            what: "covariance diagonals",
            expected: means.len(),
            found: cov_diagonals.len(),
        });
    }
    let l = means.len() as f64;
    let mut mean = vec![C64::new(0.0, 0.0); grid.len()];
    let mut cov = vec![0.0; grid.len()];
    for (m, d) in means.iter().zip(cov_diagonals) {
        if d.len() != grid.len() {
            return Err(Error::Dimension {
                what: "covariance diagonal",
                expected: grid.len(),
                found: d.len(),
            });
        }
        for (acc, v) in mean.iter_mut().zip(m.values()) {
            *acc += v;
        }
        for (acc, v) in cov.iter_mut().zip(d.iter()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= l;
    }
    for v in &mut cov {
        *v /= l * l;
    }
    Ok((ComplexImage::new(grid, mean)?, cov))
}

/// Elementwise square root of a covariance diagonal.
pub fn composite_std(grid: SceneGrid, cov_diagonal: &[f64]) -> Result<RealImage> {
    if let Some(v) = cov_diagonal.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid("covariance diagonal", format!("entries must be finite and nonnegative, found {v}")));
    }
    RealImage::new(grid, cov_diagonal.iter().map(|v| v.sqrt()).collect())
}

/// Average of the per-pixel speckle precisions.
pub fn composite_alpha(posteriors: &[SubAperturePosterior]) -> Result<RealImage> {
    let grid = common_grid(posteriors.iter().map(|p| p.mean.grid()))?;
    if let Some(p) = posteriors.iter().find(|p| p.regularizer != RegularizerKind::Identity) {
        return Err(Error::Unsupported(format!(
            "window {} was formed with the {} regularizer; its precisions index transform coefficients, not pixels",
            p.window, p.regularizer
        )));
    }
    let l = posteriors.len() as f64;
    let mut acc = vec![0.0; grid.len()];
    for p in posteriors {
        for (a, v) in acc.iter_mut().zip(&p.alpha) {
            *a += v;
        }
    }
    RealImage::new(grid, acc.into_iter().map(|v| v / l).collect())
}

/// Every composite product.
pub fn combine(posteriors: &[SubAperturePosterior]) -> Result<CompositeResult> {
    let means: Vec<&ComplexImage> = posteriors.iter().map(|p| &p.mean).collect();
    let diags: Vec<&[f64]> = posteriors.iter().map(|p| p.covariance_diagonal.as_slice()).collect();
    let max_image = composite_max(&means)?;
    let (mean_image, cov) = composite_mean(&means, &diags)?;
    let std_image = composite_std(*mean_image.grid(), &cov)?;
    let alpha_image = if posteriors.iter().all(|p| p.regularizer == RegularizerKind::Identity) {
        Some(composite_alpha(posteriors)?)
    } else {
        None
    };
    Ok(CompositeResult {
        max_image,
        mean_image,
        std_image,
        alpha_image,
        windows: posteriors.len(),
    })
}

use std::f64::consts::PI;

use super::{step_coefficients, ControlTimeline, QubitParams, Su2, Unitary2};
use crate::error::{Error, Result};
use crate::noise::{ComponentMask, NoiseSample, TrajectoryCursor};

/// Steps between polar re-projections of the accumulated product.
const RENORMALIZE_EVERY: usize = 10_000;

/// Per-run constants of the step loop.
#[derive(Clone, Copy)]
struct StepConsts {
    j0_hz: f64,
    b0_hz: f64,
    inv_insensitivity: f64,
    half_angle_per_hz: f64,
}

impl StepConsts {
    fn new(params: &QubitParams) -> Self {
        Self {
            j0_hz: params.j0_mhz * 1e6,
            b0_hz: params.dbz_mhz * 1e6,
            inv_insensitivity: 1.0 / params.insensitivity_mv,
            half_angle_per_hz: PI / params.sample_rate_hz,
        }
    }

    /// Applies one zero-order-hold step at programmed voltage `v0_mv` with noise `s`.
    #[inline(always)]
    fn apply(&self, acc: &mut Su2, v0_mv: f64, s: NoiseSample) {
        let j = self.j0_hz * ((v0_mv + 1e3 * s.delta_v) * self.inv_insensitivity).exp();
        let b = self.b0_hz + s.delta_bz;
        let (a, x, z) = step_coefficients(j, b, self.half_angle_per_hz);
        acc.left_mul_xz(a, x, z);
    }
}

fn check_alignment(timeline: &ControlTimeline, params: &QubitParams) -> Result<()> {
    let fs = params.sample_rate_hz;
    if (timeline.sample_rate_hz() - fs).abs() > 1e-9 * fs {
        return Err(Error::SampleRateMismatch {
            timeline_hz: timeline.sample_rate_hz(),
            params_hz: fs,
        });
    }
    Ok(())
}

fn check_cursor(cursor: &TrajectoryCursor, start_s: f64, params: &QubitParams) -> Result<()> {
    if (cursor.time() - start_s).abs() > 1e-3 / params.sample_rate_hz {
        return Err(Error::CursorMismatch {
            cursor_s: cursor.time(),
            timeline_s: start_s,
        });
    }
    Ok(())
}

/// Time-ordered product of the per-sample step unitaries under live noise.
///
/// `start_s` is the wall-clock time the timeline is scheduled at; the cursor
/// must be there. Sample `k` uses the cursor's masked noise at `start + kΔt`
/// (left endpoint), after which the cursor is advanced by `Δt`. On return the
/// cursor sits at the end of the timeline.
pub fn propagate(
    timeline: &ControlTimeline,
    cursor: &mut TrajectoryCursor,
    params: &QubitParams,
    start_s: f64,
) -> Result<Unitary2> {
    let mask = cursor.mask().clone();
    Ok(propagate_views(
        timeline,
        cursor,
        params,
        start_s,
        std::slice::from_ref(&mask),
    )?[0])
}

/// Like [`propagate`], but evaluates several component masks against one
/// shared noise realisation, returning one unitary per mask. The cursor's own
/// mask is ignored.
pub fn propagate_views(
    timeline: &ControlTimeline,
    cursor: &mut TrajectoryCursor,
    params: &QubitParams,
    start_s: f64,
    views: &[ComponentMask],
) -> Result<Vec<Unitary2>> {
    check_alignment(timeline, params)?;
    check_cursor(cursor, start_s, params)?;
    for v in views {
        if v.len() != cursor.values().len() {
            return Err(Error::InvalidModel(
                "mask does not match the cursor's model".into(),
            ));
        }
    }
    let consts = StepConsts::new(params);
    let dt = params.dt();
    let mut acc = vec![Su2::IDENTITY; views.len()];
    for (k, &v0) in timeline.samples().iter().enumerate() {
        let values = cursor.values();
        for (u, view) in acc.iter_mut().zip(views) {
            consts.apply(u, v0, view.sample(values));
        }
        cursor.advance(dt)?;
        if (k + 1) % RENORMALIZE_EVERY == 0 {
            acc.iter_mut().for_each(Su2::renormalize);
        }
    }
    Ok(acc.into_iter().map(Su2::to_unitary).collect())
}

/// Propagation with the noise frozen at `offset` for the whole timeline
/// (`NoiseSample::default()` gives the noiseless unitary).
pub fn propagate_static(
    timeline: &ControlTimeline,
    params: &QubitParams,
    offset: NoiseSample,
) -> Result<Unitary2> {
    check_alignment(timeline, params)?;
    Ok(propagate_samples(timeline.samples(), params, offset))
}

/// Propagation against an explicit noise record.
///
/// Each control sample is held over `substeps` equal sub-steps of
/// `Δt / substeps`; sub-step `j` of sample `k` uses `noise[k * substeps + j]`.
/// With `substeps = 1` and the noise read from a cursor this matches
/// [`propagate`].
pub fn propagate_held(
    timeline: &ControlTimeline,
    params: &QubitParams,
    noise: &[NoiseSample],
    substeps: usize,
) -> Result<Unitary2> {
    check_alignment(timeline, params)?;
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be >= 1".into()));
    }
    if noise.len() != timeline.len() * substeps {
        return Err(Error::InvalidArgument(format!(
            "noise record has {} entries, expected {}",
            noise.len(),
            timeline.len() * substeps
        )));
    }
    let consts = StepConsts {
        half_angle_per_hz: PI / (params.sample_rate_hz * substeps as f64),
        ..StepConsts::new(params)
    };
    let mut acc = Su2::IDENTITY;
    for (k, (&v0, chunk)) in timeline
        .samples()
        .iter()
        .zip(noise.chunks_exact(substeps))
        .enumerate()
    {
        for &s in chunk {
            consts.apply(&mut acc, v0, s);
        }
        if (k + 1) % RENORMALIZE_EVERY == 0 {
            acc.renormalize();
        }
    }
    Ok(acc.to_unitary())
}

pub(crate) fn propagate_samples(
    samples: &[f64],
    params: &QubitParams,
    offset: NoiseSample,
) -> Unitary2 {
    let consts = StepConsts::new(params);
    let mut acc = Su2::IDENTITY;
    for (k, &v0) in samples.iter().enumerate() {
        consts.apply(&mut acc, v0, offset);
        if (k + 1) % RENORMALIZE_EVERY == 0 {
            acc.renormalize();
        }
    }
    acc.to_unitary()
}

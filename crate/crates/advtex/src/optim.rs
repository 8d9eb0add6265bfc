//! Alternating texture/discriminator optimization.
//!
//! Each step draws a (source, auxiliary) view pair, first improves the
//! discriminator's real/fake separation (real: the auxiliary view
//! reprojected into the source view, carrying the dataset's natural
//! misalignment; fake: the current texture rendered to the source view),
//! then updates the texture to fool the frozen discriminator while an
//! exponentially decaying L1 term anchors it to the observations.
//!
//! The 2D experiment runs in the same loop with the identity render: the
//! optimized image is the texture, the condition is the source
//! observation, and the real example is the auxiliary observation itself.

use crate::disc::{self, DiscriminatorState};
use crate::error::{Error, Result};
use crate::geom::{reproject_view, ViewSample};
use crate::io::Image;
use crate::render::{clamp_texture, render_texture, TextureState};
use crate::tensor::{adam_step, Graph, TensorId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct OptimConfig {
    pub total_steps: usize,
    pub lambda0: f64,
    pub lambda_decay: f64,
    pub lambda_interval: usize,
    pub lr_texture: f32,
    pub lr_discriminator: f32,
    pub texture_size: usize,
    pub theta_z: f64,
    pub seed: u64,
    pub frame_stride: usize,
    /// Disables the adversarial term entirely (the L1 baseline).
    pub l1_only: bool,
    pub snapshot_interval: usize,
}

impl Default for OptimConfig {
    /// Desk-scale defaults; the full-scale setting (50000 steps, larger
    /// texture) is reachable through the fields.
    fn default() -> Self {
        OptimConfig {
            total_steps: 10_000,
            lambda0: 10.0,
            lambda_decay: 0.8,
            lambda_interval: 1000,
            lr_texture: 1e-3,
            lr_discriminator: 1e-4,
            texture_size: 128,
            theta_z: crate::geom::THETA_Z_SCENE,
            seed: 0,
            frame_stride: 1,
            l1_only: false,
            snapshot_interval: 1000,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::invalid_argument("optimize", "total_steps must be > 0".to_string()));
        }
        if !(self.lambda_decay > 0.0 && self.lambda_decay < 1.0) {
            return Err(Error::invalid_argument(
                "optimize",
                format!("lambda_decay {} not in (0,1)", self.lambda_decay),
            ));
        }
        if self.lr_texture <= 0.0 || self.lr_discriminator <= 0.0 {
            return Err(Error::invalid_argument("optimize", "learning rates must be > 0".to_string()));
        }
        if self.lambda_interval == 0 || self.snapshot_interval == 0 {
            return Err(Error::invalid_argument("optimize", "intervals must be > 0".to_string()));
        }
        if self.frame_stride == 0 {
            return Err(Error::invalid_argument("optimize", "frame_stride must be > 0".to_string()));
        }
        Ok(())
    }
}

/// L1 weight at a step: lambda0 decayed by lambda_decay every
/// lambda_interval steps. Computed by repeated multiplication so the early
/// values land exactly on their decimal expectations.
pub fn lambda_schedule(step: usize, config: &OptimConfig) -> f64 {
    let k = step / config.lambda_interval;
    let mut lambda = config.lambda0;
    for _ in 0..k {
        lambda *= config.lambda_decay;
    }
    lambda
}

/// What the optimizer consumes: either 2D observations or 3D view samples.
pub enum OptimInput<'a> {
    TwoD { observations: &'a [Image] },
    ThreeD { views: &'a [ViewSample] },
}

impl<'a> OptimInput<'a> {
    fn len(&self) -> usize {
        match self {
            OptimInput::TwoD { observations } => observations.len(),
            OptimInput::ThreeD { views } => views.len(),
        }
    }
}

/// Per-step losses and bookkeeping, merged over the discriminator and
/// texture sub-steps.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepDiagnostics {
    pub lambda: f64,
    pub loss_l1: f64,
    pub loss_g_adv: f64,
    pub loss_d_real: f64,
    pub loss_d_fake: f64,
    pub kept_cells_real: usize,
    pub kept_cells_fake: usize,
    /// The texture sub-step found nothing to optimize (no kept cells and
    /// an empty foreground).
    pub texture_step_skipped: bool,
    /// The real term was dropped because the reprojection had no valid
    /// pixels.
    pub real_term_skipped: bool,
}

/// One row of the loss-history CSV: means over a snapshot interval.
#[derive(Debug, Clone)]
pub struct HistoryRow {
    pub step: usize,
    pub lambda: f64,
    pub loss_l1: f64,
    pub loss_g_adv: f64,
    pub loss_d_real: f64,
    pub loss_d_fake: f64,
    pub kept_cells_real: f64,
    pub kept_cells_fake: f64,
}

pub const HISTORY_HEADER: &str =
    "step,lambda,loss_L1,loss_G_adv,loss_D_real,loss_D_fake,kept_cells_real,kept_cells_fake";

impl HistoryRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.lambda,
            self.loss_l1,
            self.loss_g_adv,
            self.loss_d_real,
            self.loss_d_fake,
            self.kept_cells_real,
            self.kept_cells_fake
        )
    }
}

/// Prepared per-view constants reused across steps.
pub struct ViewData {
    /// Foreground-masked color (the condition image).
    pub condition: Vec<f32>,
    /// Plain color (the L1 target).
    pub color: Vec<f32>,
    pub foreground: Vec<u8>,
    pub foreground_f32: Vec<f32>,
    /// Kept-cell mask for fake examples: foreground x render validity.
    pub fake_mask: Vec<f32>,
    pub fake_kept: usize,
    pub width: usize,
    pub height: usize,
}

pub fn prepare_views(input: &OptimInput, adversarial: bool) -> Result<Vec<ViewData>> {
    let mut out = Vec::with_capacity(input.len());
    match input {
        OptimInput::TwoD { observations } => {
            for obs in observations.iter() {
                let npix = obs.pixel_count();
                let foreground = vec![1u8; npix];
                let (fake_mask, fake_kept) = if adversarial {
                    disc::receptive_field_mask(&foreground, &foreground, obs.height, obs.width)
                } else {
                    (Vec::new(), 0)
                };
                out.push(ViewData {
                    condition: obs.data.clone(),
                    color: obs.data.clone(),
                    foreground_f32: vec![1.0; npix],
                    foreground,
                    fake_mask,
                    fake_kept,
                    width: obs.width,
                    height: obs.height,
                });
            }
        }
        OptimInput::ThreeD { views } => {
            for view in views.iter() {
                view.validate()?;
                let npix = view.pixel_count();
                let mut condition = view.color.clone();
                for ch in 0..3 {
                    for p in 0..npix {
                        if view.foreground[p] == 0 {
                            condition[ch * npix + p] = 0.0;
                        }
                    }
                }
                let (fake_mask, fake_kept) = if adversarial {
                    disc::receptive_field_mask(
                        &view.foreground,
                        &view.uv_valid,
                        view.height(),
                        view.width(),
                    )
                } else {
                    (Vec::new(), 0)
                };
                out.push(ViewData {
                    condition,
                    color: view.color.clone(),
                    foreground_f32: view.foreground.iter().map(|&v| f32::from(v)).collect(),
                    foreground: view.foreground.clone(),
                    fake_mask,
                    fake_kept,
                    width: view.width(),
                    height: view.height(),
                });
            }
        }
    }
    Ok(out)
}

/// Builds the fake example on the graph: the rendered texture (3D) or the
/// texture image itself (2D). Returns the node and the render validity.
fn fake_example(
    g: &mut Graph,
    texture: &TextureState,
    tex_leaf: TensorId,
    input: &OptimInput,
    view_idx: usize,
) -> Result<(TensorId, Vec<u8>)> {
    match input {
        OptimInput::TwoD { observations } => {
            let obs = &observations[view_idx];
            Ok((tex_leaf, vec![1u8; obs.pixel_count()]))
        }
        OptimInput::ThreeD { views } => render_texture(g, texture, tex_leaf, &views[view_idx]),
    }
}

/// The real example for the discriminator: the auxiliary observation
/// reprojected into the source view (2D: used directly).
fn real_example(
    input: &OptimInput,
    source_idx: usize,
    aux_idx: usize,
    theta_z: f64,
) -> Result<(Vec<f32>, Vec<u8>)> {
    match input {
        OptimInput::TwoD { observations } => {
            let aux = &observations[aux_idx];
            Ok((aux.data.clone(), vec![1u8; aux.pixel_count()]))
        }
        OptimInput::ThreeD { views } => {
            reproject_view(&views[source_idx], &views[aux_idx], theta_z)
        }
    }
}

/// One discriminator update on a view pair. The texture is frozen: it is
/// bit-identical before and after.
#[allow(clippy::too_many_arguments)]
pub fn discriminator_step(
    g: &mut Graph,
    texture: &TextureState,
    disc_state: &mut DiscriminatorState,
    input: &OptimInput,
    views: &[ViewData],
    source_idx: usize,
    aux_idx: usize,
    config: &OptimConfig,
    diag: &mut StepDiagnostics,
) -> Result<()> {
    let vd = &views[source_idx];
    let (w, h) = (vd.width, vd.height);
    g.clear();

    let handles = disc_state.attach(g, false);
    let cond = g.leaf(&vd.condition, &[3, h, w]);

    // fake: render with the texture frozen
    let tex_leaf = g.leaf_param(&texture.image, true);
    let (fake, _render_valid) = fake_example(g, texture, tex_leaf, input, source_idx)?;
    let fake_logits = disc_state.forward_logits(g, &handles, cond, fake)?;
    let fake_mask = g.leaf(&vd.fake_mask, &[vd.fake_mask.len()]);
    let (loss_fake, kept_fake) = g.masked_bce_with_logits(fake_logits, 0.0, fake_mask)?;

    // real: reprojected auxiliary
    let (real_color, real_valid) = real_example(input, source_idx, aux_idx, config.theta_z)?;
    let (real_mask_v, kept_real) = disc::receptive_field_mask(&vd.foreground, &real_valid, h, w);

    diag.kept_cells_real = kept_real;
    diag.kept_cells_fake = kept_fake;

    let loss = if kept_real == 0 {
        diag.real_term_skipped = true;
        diag.loss_d_real = 0.0;
        loss_fake
    } else {
        let real = g.leaf(&real_color, &[3, h, w]);
        let real_logits = disc_state.forward_logits(g, &handles, cond, real)?;
        let real_mask = g.leaf(&real_mask_v, &[real_mask_v.len()]);
        let (loss_real, _) = g.masked_bce_with_logits(real_logits, 1.0, real_mask)?;
        diag.loss_d_real = g.value(loss_real) as f64;
        g.add(loss_real, loss_fake)?
    };
    diag.loss_d_fake = g.value(loss_fake) as f64;

    if kept_fake > 0 || kept_real > 0 {
        g.backward(loss)?;
        disc_state.collect_gradients(g, &handles);
        disc_state.adam_step_all()?;
    }
    Ok(())
}

/// One texture update against the frozen discriminator: BCE toward the
/// real label on kept cells plus lambda(step) * L1 to the source colors.
/// The discriminator parameters are bit-identical before and after.
#[allow(clippy::too_many_arguments)]
pub fn texture_step(
    g: &mut Graph,
    texture: &mut TextureState,
    disc_state: Option<&DiscriminatorState>,
    input: &OptimInput,
    views: &[ViewData],
    source_idx: usize,
    step: usize,
    config: &OptimConfig,
    diag: &mut StepDiagnostics,
) -> Result<()> {
    let vd = &views[source_idx];
    let (w, h) = (vd.width, vd.height);
    let lambda = lambda_schedule(step, config);
    diag.lambda = lambda;

    let foreground_empty = vd.foreground_f32.iter().all(|&v| v == 0.0);
    if disc_state.is_none_or(|_| vd.fake_kept == 0) && foreground_empty {
        diag.texture_step_skipped = true;
        return Ok(());
    }

    g.clear();
    let tex_leaf = g.leaf_param(&texture.image, false);
    let (fake, _render_valid) = fake_example(g, texture, tex_leaf, input, source_idx)?;

    let target = g.leaf(&vd.color, &[3, h, w]);
    let fg_mask = g.leaf(&vd.foreground_f32, &[h, w]);
    let (loss_l1, _) = g.l1_loss(fake, target, fg_mask)?;
    diag.loss_l1 = g.value(loss_l1) as f64;

    let loss = match disc_state {
        Some(disc_state) if vd.fake_kept > 0 => {
            let handles = disc_state.attach(g, true);
            let cond = g.leaf(&vd.condition, &[3, h, w]);
            let logits = disc_state.forward_logits(g, &handles, cond, fake)?;
            let mask = g.leaf(&vd.fake_mask, &[vd.fake_mask.len()]);
            let (loss_adv, _) = g.masked_bce_with_logits(logits, 1.0, mask)?;
            diag.loss_g_adv = g.value(loss_adv) as f64;
            let weighted_l1 = g.scale(loss_l1, lambda as f32);
            g.add(loss_adv, weighted_l1)?
        }
        Some(_) => {
            // adversarial term unavailable for this view; keep the L1 anchor
            g.scale(loss_l1, lambda as f32)
        }
        None => loss_l1,
    };

    g.backward(loss)?;
    if let Some(grad) = g.take_grad(tex_leaf) {
        texture.image.accumulate_grad(&grad);
        adam_step(&mut texture.image, &mut texture.adam)?;
        clamp_texture(texture);
    }
    Ok(())
}

/// Indices surviving a frame stride: every `stride`-th view.
pub fn strided_indices(n: usize, stride: usize) -> Vec<usize> {
    (0..n).step_by(stride.max(1)).collect()
}

/// Snapshot callback data.
pub struct Snapshot<'a> {
    pub step: usize,
    pub texture: &'a TextureState,
    pub row: &'a HistoryRow,
}

/// Runs the full alternating optimization. Returns the final texture and
/// the per-interval loss history; `observer` (when given) fires at every
/// snapshot interval and once at the end.
pub fn optimize_texture(
    input: &OptimInput,
    config: &OptimConfig,
    mut observer: Option<&mut dyn FnMut(Snapshot)>,
) -> Result<(TextureState, Vec<HistoryRow>)> {
    config.validate()?;
    let indices = strided_indices(input.len(), config.frame_stride);
    if indices.len() < 2 {
        return Err(Error::invalid_argument(
            "optimize_texture",
            format!(
                "need at least 2 views after frame_stride {}, have {}",
                config.frame_stride,
                indices.len()
            ),
        ));
    }

    let texture_size = match input {
        OptimInput::TwoD { observations } => {
            let obs = &observations[0];
            if obs.width != obs.height {
                return Err(Error::invalid_argument(
                    "optimize_texture",
                    format!("2d mode requires square observations, got {}x{}", obs.width, obs.height),
                ));
            }
            if observations.iter().any(|o| (o.width, o.height) != (obs.width, obs.height)) {
                return Err(Error::invalid_argument(
                    "optimize_texture",
                    "observations differ in size".to_string(),
                ));
            }
            obs.width
        }
        OptimInput::ThreeD { views } => {
            if let Some(v) = views.iter().find(|v| v.width() < 2 || v.height() < 2) {
                return Err(Error::invalid_argument(
                    "optimize_texture",
                    format!("view too small: {}x{}", v.width(), v.height()),
                ));
            }
            config.texture_size
        }
    };

    let adversarial = !config.l1_only;
    let views = prepare_views(input, adversarial)?;

    let mut texture = TextureState::new(texture_size);
    texture.adam.learning_rate = config.lr_texture;
    let mut disc_state = if adversarial {
        let mut d = disc::init_discriminator(6, config.seed)?;
        d.set_learning_rate(config.lr_discriminator);
        Some(d)
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut g = Graph::new();
    let mut history = Vec::new();
    let mut acc = IntervalAccumulator::default();

    for step in 0..config.total_steps {
        // ordered pair without replacement from the strided subset
        let si = rng.gen_range(0..indices.len());
        let mut ai = rng.gen_range(0..indices.len() - 1);
        if ai >= si {
            ai += 1;
        }
        let (source_idx, aux_idx) = (indices[si], indices[ai]);

        let mut diag = StepDiagnostics::default();
        if let Some(d) = disc_state.as_mut() {
            discriminator_step(
                &mut g, &texture, d, input, &views, source_idx, aux_idx, config, &mut diag,
            )?;
        }
        texture_step(
            &mut g,
            &mut texture,
            disc_state.as_ref(),
            input,
            &views,
            source_idx,
            step,
            config,
            &mut diag,
        )?;
        acc.add(&diag);

        let interval_end = (step + 1) % config.snapshot_interval == 0;
        let last = step + 1 == config.total_steps;
        if interval_end || last {
            let row = acc.flush(step + 1, lambda_schedule(step, config));
            if let Some(obs) = observer.as_mut() {
                obs(Snapshot {
                    step: step + 1,
                    texture: &texture,
                    row: &row,
                });
            }
            history.push(row);
        }
    }

    Ok((texture, history))
}

#[derive(Default)]
struct IntervalAccumulator {
    n: usize,
    loss_l1: f64,
    loss_g_adv: f64,
    loss_d_real: f64,
    loss_d_fake: f64,
    kept_real: f64,
    kept_fake: f64,
}

impl IntervalAccumulator {
    fn add(&mut self, d: &StepDiagnostics) {
        self.n += 1;
        self.loss_l1 += d.loss_l1;
        self.loss_g_adv += d.loss_g_adv;
        self.loss_d_real += d.loss_d_real;
        self.loss_d_fake += d.loss_d_fake;
        self.kept_real += d.kept_cells_real as f64;
        self.kept_fake += d.kept_cells_fake as f64;
    }

    fn flush(&mut self, step: usize, lambda: f64) -> HistoryRow {
        let n = self.n.max(1) as f64;
        let row = HistoryRow {
            step,
            lambda,
            loss_l1: self.loss_l1 / n,
            loss_g_adv: self.loss_g_adv / n,
            loss_d_real: self.loss_d_real / n,
            loss_d_fake: self.loss_d_fake / n,
            kept_cells_real: self.kept_real / n,
            kept_cells_fake: self.kept_fake / n,
        };
        *self = IntervalAccumulator::default();
        row
    }
}

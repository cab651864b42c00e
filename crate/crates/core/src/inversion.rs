//! Reconstructs an image as a single shared style by gradient descent on the
//! reconstruction error.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{Generator, ImageBuffer, StyleVector};
use crate::numeric::{AdamState, Rng};
use crate::par;
use crate::scenario::SceneSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossMode {
    #[default]
    #[serde(rename = "mse")]
    Mse,
    /// Pixel MSE plus the MSE of the 2× box-downsampled images.
    #[serde(rename = "mse+halfscale", alias = "mse_halfscale")]
    MseHalfscale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    pub restarts: usize,
    pub steps: usize,
    pub lr: f64,
    pub loss: LossMode,
    pub seed: u64,
    /// Starting style of the first restart instead of a random draw.
    pub init: Option<StyleVector>,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            steps: 300,
            lr: 0.05,
            loss: LossMode::Mse,
            seed: 0,
            init: None,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument("lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InversionResult {
    pub w: StyleVector,
    pub final_loss: f64,
    /// Best-so-far loss of the winning restart after each step (entry 0 is
    /// the initialization); non-increasing, ends with `final_loss`.
    pub loss_trace: Vec<f64>,
    /// Re-synthesis of `w` at every layer.
    pub reconstructed: ImageBuffer,
    /// Best loss of every restart.
    pub restart_losses: Vec<f64>,
    pub best_restart: usize,
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(1) as f64;
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

pub fn reconstruction_loss(
    target: &ImageBuffer,
    candidate: &ImageBuffer,
    mode: LossMode,
) -> Result<f64> {
    candidate.ensure_dims(target.height(), target.width())?;
    let full = mse(target.data(), candidate.data());
    Ok(match mode {
        LossMode::Mse => full,
        LossMode::MseHalfscale => {
            full + mse(target.half_scale().data(), candidate.half_scale().data())
        }
    })
}

/// Loss and its gradient with respect to every candidate pixel.
fn loss_gradient(
    target: &ImageBuffer,
    target_half: Option<&ImageBuffer>,
    candidate: &ImageBuffer,
) -> (f64, Vec<f64>) {
    let t = target.data();
    let c = candidate.data();
    let scale = 2.0 / t.len() as f64;
    let mut grad: Vec<f64> = c.iter().zip(t).map(|(x, y)| scale * (x - y)).collect();
    let mut loss = mse(t, c);
    if let Some(th) = target_half {
        let ch = candidate.half_scale();
        loss += mse(th.data(), ch.data());
        let (h, w) = th.dims();
        let width = candidate.width();
        // Each half-scale pixel averages four inputs.
        let hs = 2.0 / th.data().len() as f64 * 0.25;
        for y in 0..h {
            for x in 0..w {
                for k in 0..3 {
                    let i = (y * w + x) * 3 + k;
                    let g = hs * (ch.data()[i] - th.data()[i]);
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        grad[((2 * y + dy) * width + 2 * x + dx) * 3 + k] += g;
                    }
                }
            }
        }
    }
    (loss, grad)
}

/// Receives progress from a running inversion and may request cancellation.
pub trait InversionObserver: Sync {
    /// `done` of `total` optimization steps finished; `best_loss` over all
    /// restarts so far.
    fn on_progress(&self, _done: usize, _total: usize, _best_loss: f64) {}

    fn cancelled(&self) -> bool {
        false
    }
}

struct Silent;
impl InversionObserver for Silent {}

struct Restart {
    w: StyleVector,
    loss: f64,
    trace: Vec<f64>,
}

struct Shared<'a> {
    observer: &'a dyn InversionObserver,
    done: AtomicUsize,
    total: usize,
    best: Mutex<f64>,
}

impl Shared<'_> {
    fn step(&self, loss: f64) {
        let best = {
            let mut b = self.best.lock().expect("progress lock");
            if loss < *b {
                *b = loss;
            }
            *b
        };
        let done = self.done.fetch_add(1, Ordering::SeqCst) + 1;
        self.observer.on_progress(done, self.total, best);
    }
}

#[allow(clippy::too_many_arguments)]
fn run_restart(
    generator: &Generator,
    scene: &SceneSpec,
    target: &ImageBuffer,
    target_half: Option<&ImageBuffer>,
    cfg: &InversionConfig,
    start: (Vec<f64>, StyleVector),
    shared: &Shared<'_>,
) -> Result<Restart> {
    let (mut s, mut w) = start;
    let d = s.len();
    let mut adam = AdamState::new(d, cfg.lr);
    let lr_min = cfg.lr * 0.01;
    let mut best = (f64::INFINITY, w.clone());
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    for t in 0..=cfg.steps {
        if shared.observer.cancelled() {
            return Err(Error::Cancelled);
        }
        let params = generator.decode_style(&w, scene)?;
        let loss = if t < cfg.steps {
            let jac = generator.params_jacobian_unchecked(params.values(), scene);
            let (loss, pixel_grad) = loss_gradient(target, target_half, &jac.image);
            let mut grad = vec![0.0; d];
            for (k, a) in scene.attributes.iter().enumerate() {
                let slope = Generator::decode_slope(scene, k, w.as_slice()[a.component]);
                if slope == 0.0 {
                    continue;
                }
                let dl: f64 = pixel_grad
                    .iter()
                    .zip(&jac.gradients[k])
                    .map(|(g, j)| g * j)
                    .sum();
                grad[a.component] += dl * slope;
            }
            for (g, wc) in grad.iter_mut().zip(w.as_slice()) {
                *g *= 1.0 - wc * wc;
            }
            if loss < best.0 {
                best = (loss, w.clone());
            }
            let progress = t as f64 / cfg.steps as f64;
            adam.lr =
                lr_min + 0.5 * (cfg.lr - lr_min) * (1.0 + (std::f64::consts::PI * progress).cos());
            adam.step(&mut s, &grad)?;
            w = StyleVector::new(s.iter().map(|v| v.tanh()).collect())
                .map_err(|_| Error::OutOfDomain("inversion left the style domain".into()))?;
            loss
        } else {
            let img = generator.render_unchecked(params.values(), scene);
            let loss = reconstruction_loss(target, &img, cfg.loss)?;
            if loss < best.0 {
                best = (loss, w.clone());
            }
            loss
        };
        trace.push(best.0);
        if t < cfg.steps {
            shared.step(loss);
        }
    }
    Ok(Restart {
        w: best.1,
        loss: best.0,
        trace,
    })
}

/// Best-of-restarts Adam descent over the pre-activation `s` of a shared
/// style `w = tanh(s)`.
pub fn invert(
    generator: &Generator,
    target: &ImageBuffer,
    scene: &SceneSpec,
    cfg: &InversionConfig,
) -> Result<InversionResult> {
    invert_observed(generator, target, scene, cfg, &Silent)
}

pub fn invert_observed(
    generator: &Generator,
    target: &ImageBuffer,
    scene: &SceneSpec,
    cfg: &InversionConfig,
    observer: &dyn InversionObserver,
) -> Result<InversionResult> {
    cfg.validate()?;
    let n = generator.image_size();
    target.ensure_dims(n, n)?;
    scene.validate(generator.layers(), generator.style_dim())?;
    if let Some(init) = &cfg.init {
        if init.len() != generator.style_dim() {
            return Err(Error::dims(
                "initial style",
                generator.style_dim(),
                init.len(),
            ));
        }
    }
    let target_half = match cfg.loss {
        LossMode::Mse => None,
        LossMode::MseHalfscale => Some(target.half_scale()),
    };
    let shared = Shared {
        observer,
        done: AtomicUsize::new(0),
        total: cfg.restarts * cfg.steps,
        best: Mutex::new(f64::INFINITY),
    };
    let base = Rng::new(cfg.seed).derive("inversion");
    let restarts = par::map_indexed(cfg.restarts, |r| {
        let start = match (&cfg.init, r) {
            (Some(init), 0) => (
                init.as_slice().iter().map(|v| v.atanh()).collect(),
                init.clone(),
            ),
            _ => {
                let z = generator.sample_latent(&mut base.derive_index(r as u64));
                let s = generator.preactivation(z.as_slice());
                let w = StyleVector::new(s.iter().map(|v| v.tanh()).collect())
                    .expect("tanh of a finite vector");
                (s, w)
            }
        };
        run_restart(
            generator,
            scene,
            target,
            target_half.as_ref(),
            cfg,
            start,
            &shared,
        )
    });
    let restarts = restarts.into_iter().collect::<Result<Vec<_>>>()?;
    let best_restart = (0..restarts.len())
        .min_by(|&a, &b| restarts[a].loss.total_cmp(&restarts[b].loss))
        .expect("at least one restart");
    let restart_losses = restarts.iter().map(|r| r.loss).collect();
    let Restart { w, loss, trace } = restarts
        .into_iter()
        .nth(best_restart)
        .expect("index in range");
    let reconstructed = generator.synthesize_style(&w, scene)?;
    Ok(InversionResult {
        w,
        final_loss: loss,
        loss_trace: trace,
        reconstructed,
        restart_losses,
        best_restart,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Running,
    Done,
    Cancelled,
    Failed,
}

#[derive(Default)]
struct JobShared {
    cancel: AtomicBool,
    progress: Mutex<(f64, Option<f64>)>,
}

impl InversionObserver for JobShared {
    fn on_progress(&self, done: usize, total: usize, best_loss: f64) {
        let mut p = self.progress.lock().expect("progress lock");
        let f = if total == 0 {
            1.0
        } else {
            done as f64 / total as f64
        };
        if f > p.0 {
            p.0 = f;
        }
        p.1 = Some(best_loss);
    }

    fn cancelled(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }
}

/// An inversion running on its own thread.
pub struct InversionJob {
    shared: Arc<JobShared>,
    handle: Mutex<Option<JoinHandle<Result<InversionResult>>>>,
    outcome: Mutex<Option<Result<InversionResult, String>>>,
}

/// Snapshot of a running or finished job.
#[derive(Clone, Debug, PartialEq)]
pub struct JobStatus {
    pub state: JobState,
    pub progress: f64,
    pub best_loss: Option<f64>,
    pub result: Option<InversionResult>,
    pub error: Option<String>,
}

pub fn invert_async(
    generator: Arc<Generator>,
    target: ImageBuffer,
    scene: SceneSpec,
    cfg: InversionConfig,
) -> InversionJob {
    let shared = Arc::new(JobShared::default());
    let observer = Arc::clone(&shared);
    let handle =
        std::thread::spawn(move || invert_observed(&generator, &target, &scene, &cfg, &*observer));
    InversionJob {
        shared,
        handle: Mutex::new(Some(handle)),
        outcome: Mutex::new(None),
    }
}

impl InversionJob {
    pub fn cancel(&self) {
        self.shared.cancel.store(true, Ordering::SeqCst);
    }

    fn collect(&self, block: bool) {
        let mut handle = self.handle.lock().expect("job lock");
        let finished = handle.as_ref().is_some_and(|h| h.is_finished());
        if handle.is_some() && (block || finished) {
            let joined = handle.take().expect("checked").join();
            let outcome = match joined {
                Ok(Ok(r)) => Ok(r),
                Ok(Err(e)) => Err(e.to_string()),
                Err(_) => Err("inversion thread panicked".to_string()),
            };
            *self.outcome.lock().expect("job lock") = Some(outcome);
        }
    }

    pub fn status(&self) -> JobStatus {
        self.collect(false);
        let (progress, best_loss) = *self.shared.progress.lock().expect("progress lock");
        let outcome = self.outcome.lock().expect("job lock").clone();
        let cancelled = self.shared.cancelled();
        match outcome {
            None => JobStatus {
                state: JobState::Running,
                progress,
                best_loss,
                result: None,
                error: None,
            },
            Some(Ok(r)) if !cancelled => JobStatus {
                state: JobState::Done,
                progress: 1.0,
                best_loss: Some(r.final_loss),
                result: Some(r),
                error: None,
            },
            Some(Ok(_)) => JobStatus {
                state: JobState::Cancelled,
                progress,
                best_loss,
                result: None,
                error: None,
            },
            Some(Err(e)) => JobStatus {
                state: if cancelled {
                    JobState::Cancelled
                } else {
                    JobState::Failed
                },
                progress,
                best_loss,
                result: None,
                error: if cancelled { None } else { Some(e) },
            },
        }
    }

    /// Blocks until the job ends.
    pub fn wait(&self) -> JobStatus {
        self.collect(true);
        self.status()
    }
}

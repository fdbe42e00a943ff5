//! Learning-rate schedule state machine.
//!
//! Covers the fixed-epoch schedules (linear warm-up followed by linear decay,
//! or by a constant plateau with a linear tail) and the adaptive schedule,
//! where a non-improving validation loss opens a cool-down window of
//! `patience` epochs. A new best loss inside the window resumes constant
//! training; otherwise the run stops when the window closes.
//!
//! The state is a plain value: every transition returns a fresh
//! [`ScheduleState`], so a trace can be replayed or forked freely.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("invalid schedule configuration: {0}")]
    InvalidConfig(String),
    #[error("step fraction {value} outside [0, {limit}]")]
    StepOutOfRange { value: f64, limit: f64 },
    #[error("schedule already stopped at epoch {0}")]
    AlreadyStopped(u32),
    #[error("validation loss is not finite ({0}) at epoch {1}")]
    NonFiniteLoss(f64, u32),
    #[error("adaptive schedules need a validation loss every epoch")]
    MonitoringRequired,
    #[error("loss sequence exhausted after {0} epochs without a stop")]
    LossesExhausted(u32),
}

/// Shape of the learning rate inside an adaptive cool-down window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CooldownShape {
    Linear,
    Constant,
}

/// Post-warm-up shape of a fixed-epoch schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayShape {
    /// Linear decay from `max_lr` to zero over all post-warm-up epochs.
    Linear,
    /// Constant `max_lr`, then linear decay to zero over the last `patience` epochs.
    Hybrid { patience: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Adaptive {
        patience: u32,
        cooldown: CooldownShape,
        resumption: bool,
    },
    Fixed {
        total_epochs: u32,
        decay: DecayShape,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub mode: ScheduleMode,
    pub warmup_epochs: u32,
    pub max_lr: f64,
    pub steps_per_epoch: u32,
}

pub const DEFAULT_WARMUP_EPOCHS: u32 = 2;
pub const DEFAULT_MAX_LR: f64 = 2e-5;
pub const DEFAULT_PATIENCE: u32 = 7;

impl ScheduleConfig {
    pub fn new(mode: ScheduleMode) -> Self {
        Self {
            mode,
            warmup_epochs: DEFAULT_WARMUP_EPOCHS,
            max_lr: DEFAULT_MAX_LR,
            steps_per_epoch: 1,
        }
    }

    /// Five epochs, linear decay.
    pub fn original() -> Self {
        Self::fixed(5, DecayShape::Linear)
    }

    /// Twenty epochs, linear decay.
    pub fn stable() -> Self {
        Self::fixed(20, DecayShape::Linear)
    }

    /// Constant learning rate with a linear cool-down of 7 epochs and resumption.
    pub fn adaptive() -> Self {
        Self::adaptive_with(DEFAULT_PATIENCE, CooldownShape::Linear, true)
    }

    pub fn fixed(total_epochs: u32, decay: DecayShape) -> Self {
        Self::new(ScheduleMode::Fixed {
            total_epochs,
            decay,
        })
    }

    pub fn adaptive_with(patience: u32, cooldown: CooldownShape, resumption: bool) -> Self {
        Self::new(ScheduleMode::Adaptive {
            patience,
            cooldown,
            resumption,
        })
    }

    pub fn with_max_lr(mut self, max_lr: f64) -> Self {
        self.max_lr = max_lr;
        self
    }

    pub fn with_warmup(mut self, warmup_epochs: u32) -> Self {
        self.warmup_epochs = warmup_epochs;
        self
    }

    pub fn with_steps_per_epoch(mut self, steps: u32) -> Self {
        self.steps_per_epoch = steps;
        self
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let bad = |msg: String| Err(ScheduleError::InvalidConfig(msg));
        if !(self.max_lr.is_finite() && self.max_lr >= 0.0) {
            return bad(format!("max_lr must be non-negative, got {}", self.max_lr));
        }
        if self.steps_per_epoch == 0 {
            return bad("steps_per_epoch must be positive".into());
        }
        if let ScheduleMode::Fixed {
            total_epochs,
            decay,
        } = self.mode
        {
            if total_epochs <= self.warmup_epochs {
                return bad(format!(
                    "total_epochs ({total_epochs}) must exceed warmup_epochs ({})",
                    self.warmup_epochs
                ));
            }
            if let DecayShape::Hybrid { patience } = decay {
                if patience == 0 || patience >= total_epochs - self.warmup_epochs {
                    return bad(format!(
                        "hybrid patience {patience} must lie in [1, {})",
                        total_epochs - self.warmup_epochs
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.mode, ScheduleMode::Adaptive { .. })
    }

    /// Length of the cool-down window, when the mode has a fixed one.
    fn patience(&self) -> u32 {
        match self.mode {
            ScheduleMode::Adaptive { patience, .. } => patience,
            ScheduleMode::Fixed {
                total_epochs,
                decay: DecayShape::Linear,
            } => total_epochs - self.warmup_epochs,
            ScheduleMode::Fixed {
                decay: DecayShape::Hybrid { patience },
                ..
            } => patience,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    WarmUp,
    Constant,
    /// `entered_at` is the epoch boundary at which the window opened.
    CoolDown {
        epochs_remaining: u32,
        lr_at_entry: f64,
        entered_at: u32,
        length: u32,
    },
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochDecision {
    Continue,
    EnterCoolDown,
    ResumeConstant,
    Stop,
}

impl fmt::Display for EpochDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpochDecision::Continue => "continue",
            EpochDecision::EnterCoolDown => "enter_cooldown",
            EpochDecision::ResumeConstant => "resume_constant",
            EpochDecision::Stop => "stop",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub phase: Phase,
    pub epochs_completed: u32,
    pub best_val_loss: Option<f64>,
    pub stop_epoch: Option<u32>,
}

impl ScheduleState {
    pub fn new(config: &ScheduleConfig) -> Self {
        let mut state = Self {
            phase: Phase::WarmUp,
            epochs_completed: 0,
            best_val_loss: None,
            stop_epoch: None,
        };
        if config.warmup_epochs == 0 {
            state.phase = post_warmup_phase(config, 0);
        }
        state
    }

    pub fn is_stopped(&self) -> bool {
        matches!(self.phase, Phase::Stopped)
    }

    /// Learning rate at `step_fraction` epochs into the run.
    pub fn lr_at(&self, config: &ScheduleConfig, step_fraction: f64) -> Result<f64, ScheduleError> {
        if let Some(epoch) = self.stop_epoch {
            return Err(ScheduleError::AlreadyStopped(epoch));
        }
        let limit = f64::from(self.epochs_completed) + 1.0;
        if !(0.0..=limit).contains(&step_fraction) {
            return Err(ScheduleError::StepOutOfRange {
                value: step_fraction,
                limit,
            });
        }
        let lr = match self.phase {
            Phase::WarmUp => config.max_lr * step_fraction / f64::from(config.warmup_epochs),
            Phase::Constant => config.max_lr,
            Phase::CoolDown {
                lr_at_entry,
                entered_at,
                length,
                ..
            } => {
                let constant = matches!(
                    config.mode,
                    ScheduleMode::Adaptive {
                        cooldown: CooldownShape::Constant,
                        ..
                    }
                );
                if constant {
                    lr_at_entry
                } else {
                    let elapsed = step_fraction - f64::from(entered_at);
                    (lr_at_entry * (1.0 - elapsed / f64::from(length))).max(0.0)
                }
            }
            Phase::Stopped => unreachable!("stop_epoch is set whenever the phase is Stopped"),
        };
        Ok(lr)
    }

    /// Learning rate for optimizer step `step` (0-based) of the epoch currently running.
    pub fn lr_for_step(&self, config: &ScheduleConfig, step: u32) -> Result<f64, ScheduleError> {
        let t = f64::from(self.epochs_completed) + f64::from(step) / f64::from(config.steps_per_epoch);
        self.lr_at(config, t)
    }

    /// Closes the current epoch with its validation loss.
    pub fn observe_validation_loss(
        &self,
        config: &ScheduleConfig,
        val_loss: f64,
    ) -> Result<(ScheduleState, EpochDecision), ScheduleError> {
        if let Some(epoch) = self.stop_epoch {
            return Err(ScheduleError::AlreadyStopped(epoch));
        }
        let epoch = self.epochs_completed + 1;
        if !val_loss.is_finite() {
            return Err(ScheduleError::NonFiniteLoss(val_loss, epoch));
        }
        let improved = self.best_val_loss.is_none_or(|best| val_loss < best);
        let mut next = *self;
        next.epochs_completed = epoch;
        if improved {
            next.best_val_loss = Some(val_loss);
        }

        let decision = match config.mode {
            ScheduleMode::Fixed { .. } => return Ok(self.advance_fixed(config)),
            ScheduleMode::Adaptive {
                patience,
                resumption,
                ..
            } => match self.phase {
                Phase::WarmUp => {
                    if epoch >= config.warmup_epochs {
                        next.phase = Phase::Constant;
                    }
                    EpochDecision::Continue
                }
                Phase::Constant if improved => EpochDecision::Continue,
                Phase::Constant if patience == 0 => {
                    next.stop(epoch);
                    EpochDecision::Stop
                }
                Phase::Constant => {
                    next.phase = Phase::CoolDown {
                        epochs_remaining: patience,
                        lr_at_entry: config.max_lr,
                        entered_at: epoch,
                        length: patience,
                    };
                    EpochDecision::EnterCoolDown
                }
                Phase::CoolDown { .. } if improved && resumption => {
                    next.phase = Phase::Constant;
                    EpochDecision::ResumeConstant
                }
                Phase::CoolDown {
                    epochs_remaining,
                    lr_at_entry,
                    entered_at,
                    length,
                } => {
                    let remaining = epochs_remaining - 1;
                    if remaining == 0 {
                        next.stop(epoch);
                        EpochDecision::Stop
                    } else {
                        next.phase = Phase::CoolDown {
                            epochs_remaining: remaining,
                            lr_at_entry,
                            entered_at,
                            length,
                        };
                        EpochDecision::Continue
                    }
                }
                Phase::Stopped => unreachable!(),
            },
        };
        Ok((next, decision))
    }

    /// Closes the current epoch without validation. Only fixed schedules accept this.
    pub fn complete_unmonitored_epoch(
        &self,
        config: &ScheduleConfig,
    ) -> Result<(ScheduleState, EpochDecision), ScheduleError> {
        if let Some(epoch) = self.stop_epoch {
            return Err(ScheduleError::AlreadyStopped(epoch));
        }
        if config.is_adaptive() {
            return Err(ScheduleError::MonitoringRequired);
        }
        Ok(self.advance_fixed(config))
    }

    fn advance_fixed(&self, config: &ScheduleConfig) -> (ScheduleState, EpochDecision) {
        let ScheduleMode::Fixed { total_epochs, .. } = config.mode else {
            unreachable!("advance_fixed on adaptive schedule");
        };
        let epoch = self.epochs_completed + 1;
        let mut next = *self;
        next.epochs_completed = epoch;
        if epoch >= total_epochs {
            next.stop(epoch);
            return (next, EpochDecision::Stop);
        }
        next.phase = match self.phase {
            Phase::WarmUp if epoch < config.warmup_epochs => Phase::WarmUp,
            Phase::CoolDown {
                lr_at_entry,
                entered_at,
                length,
                ..
            } => Phase::CoolDown {
                epochs_remaining: total_epochs - epoch,
                lr_at_entry,
                entered_at,
                length,
            },
            _ => post_warmup_phase(config, epoch),
        };
        (next, EpochDecision::Continue)
    }

    fn stop(&mut self, epoch: u32) {
        self.phase = Phase::Stopped;
        self.stop_epoch = Some(epoch);
    }
}

/// Phase of a schedule once warm-up has finished, `epoch` epochs into the run.
fn post_warmup_phase(config: &ScheduleConfig, epoch: u32) -> Phase {
    match config.mode {
        ScheduleMode::Adaptive { .. } => Phase::Constant,
        ScheduleMode::Fixed { total_epochs, .. } => {
            let length = config.patience();
            let entered_at = total_epochs - length;
            if epoch >= entered_at {
                Phase::CoolDown {
                    epochs_remaining: total_epochs - epoch,
                    lr_at_entry: config.max_lr,
                    entered_at,
                    length,
                }
            } else {
                Phase::Constant
            }
        }
    }
}

/// Outcome of replaying a loss sequence through a schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleTrace {
    pub stop_epoch: Option<u32>,
    pub cap_reached: bool,
    /// Learning rate at the end of each epoch (before the epoch's decision).
    pub lr_curve: Vec<f64>,
    pub decisions: Vec<EpochDecision>,
}

/// Replays `losses` (one per epoch) through a fresh schedule.
///
/// Fixed schedules ignore the loss values. With `cap`, replay ends after that
/// many epochs and the trace reports `cap_reached` instead of a stop.
pub fn schedule_trace(
    config: &ScheduleConfig,
    losses: &[f64],
    cap: Option<u32>,
) -> Result<ScheduleTrace, ScheduleError> {
    config.validate()?;
    let mut state = ScheduleState::new(config);
    let mut trace = ScheduleTrace {
        stop_epoch: None,
        cap_reached: false,
        lr_curve: Vec::new(),
        decisions: Vec::new(),
    };
    loop {
        let epoch = state.epochs_completed;
        if cap.is_some_and(|c| epoch >= c) {
            trace.cap_reached = true;
            return Ok(trace);
        }
        let lr = state.lr_at(config, f64::from(epoch) + 1.0)?;
        let (next, decision) = match (config.mode, losses.get(epoch as usize)) {
            (_, Some(&loss)) => state.observe_validation_loss(config, loss)?,
            (ScheduleMode::Fixed { .. }, None) => state.complete_unmonitored_epoch(config)?,
            (ScheduleMode::Adaptive { .. }, None) => {
                return Err(ScheduleError::LossesExhausted(epoch))
            }
        };
        trace.lr_curve.push(lr);
        trace.decisions.push(decision);
        state = next;
        if let Some(stop) = state.stop_epoch {
            trace.stop_epoch = Some(stop);
            return Ok(trace);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs() + 1e-18
    }

    fn run(config: &ScheduleConfig, losses: &[f64]) -> (ScheduleState, Vec<EpochDecision>) {
        let mut state = ScheduleState::new(config);
        let mut out = Vec::new();
        for &l in losses {
            let (s, d) = state.observe_validation_loss(config, l).unwrap();
            state = s;
            out.push(d);
        }
        (state, out)
    }

    #[test]
    fn warmup_is_linear_from_zero() {
        let cfg = ScheduleConfig::adaptive();
        let state = ScheduleState::new(&cfg);
        assert_eq!(state.lr_at(&cfg, 0.0).unwrap(), 0.0);
        assert!(close(state.lr_at(&cfg, 1.0).unwrap(), 1e-5));
    }

    #[test]
    fn linear_cooldown_interpolates_from_entry() {
        let cfg = ScheduleConfig::adaptive();
        // improvements through epoch 7, non-improvement at epoch 8
        let losses = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.45, 0.46, 0.47, 0.48];
        let (state, decisions) = run(&cfg, &losses);
        assert_eq!(decisions[7], EpochDecision::EnterCoolDown);
        assert_eq!(state.epochs_completed, 11);
        assert!(close(state.lr_at(&cfg, 11.5).unwrap(), 2e-5 * (1.0 - 3.5 / 7.0)));
        assert!(close(state.lr_at(&cfg, 11.5).unwrap(), 1e-5));
    }

    #[test]
    fn fixed_linear_decays_over_post_warmup_epochs() {
        let cfg = ScheduleConfig::original();
        let mut state = ScheduleState::new(&cfg);
        for _ in 0..3 {
            state = state.complete_unmonitored_epoch(&cfg).unwrap().0;
        }
        assert!(close(state.lr_at(&cfg, 3.5).unwrap(), 1e-5));
    }

    #[test]
    fn hybrid_is_flat_then_linear() {
        let cfg = ScheduleConfig::fixed(20, DecayShape::Hybrid { patience: 7 });
        let mut state = ScheduleState::new(&cfg);
        let mut lrs = Vec::new();
        while !state.is_stopped() {
            let e = state.epochs_completed;
            lrs.push(state.lr_at(&cfg, f64::from(e) + 0.5).unwrap());
            state = state.complete_unmonitored_epoch(&cfg).unwrap().0;
        }
        assert_eq!(lrs.len(), 20);
        assert!(close(lrs[5], 2e-5));
        assert!(close(lrs[12], 2e-5));
        assert!(close(lrs[13], 2e-5 * (1.0 - 0.5 / 7.0)));
        assert!(close(lrs[19], 2e-5 * (0.5 / 7.0)));
    }

    #[test]
    fn rejects_negative_fraction_and_queries_after_stop() {
        let cfg = ScheduleConfig::original();
        let state = ScheduleState::new(&cfg);
        assert!(matches!(
            state.lr_at(&cfg, -0.1),
            Err(ScheduleError::StepOutOfRange { .. })
        ));
        assert!(state.lr_at(&cfg, 1.5).is_err());
        let mut s = state;
        while !s.is_stopped() {
            s = s.complete_unmonitored_epoch(&cfg).unwrap().0;
        }
        assert_eq!(s.lr_at(&cfg, 5.0), Err(ScheduleError::AlreadyStopped(5)));
        assert_eq!(
            s.observe_validation_loss(&cfg, 0.1).unwrap_err(),
            ScheduleError::AlreadyStopped(5)
        );
    }

    #[test]
    fn monotone_improvement_continues() {
        let cfg = ScheduleConfig::adaptive();
        let (state, d) = run(&cfg, &[1.0, 0.9, 0.8]);
        assert!(d.iter().all(|d| *d == EpochDecision::Continue));
        assert_eq!(state.phase, Phase::Constant);
    }

    #[test]
    fn non_improvement_opens_cooldown_with_full_patience() {
        let cfg = ScheduleConfig::adaptive();
        let (state, d) = run(&cfg, &[1.0, 0.8, 0.5, 0.6]);
        assert_eq!(d[3], EpochDecision::EnterCoolDown);
        match state.phase {
            Phase::CoolDown {
                epochs_remaining, ..
            } => assert_eq!(epochs_remaining, 7),
            other => panic!("unexpected phase {other:?}"),
        }
    }

    #[test]
    fn new_best_in_cooldown_resumes() {
        let cfg = ScheduleConfig::adaptive();
        let (state, d) = run(&cfg, &[1.0, 0.8, 0.5, 0.6, 0.45]);
        assert_eq!(d[4], EpochDecision::ResumeConstant);
        assert_eq!(state.phase, Phase::Constant);
        assert_eq!(state.best_val_loss, Some(0.45));
        assert!(close(state.lr_at(&cfg, 5.5).unwrap(), cfg.max_lr));
    }

    #[test]
    fn equal_loss_is_not_an_improvement() {
        let cfg = ScheduleConfig::adaptive();
        let (_, d) = run(&cfg, &[1.0, 0.8, 0.5, 0.5]);
        assert_eq!(d[3], EpochDecision::EnterCoolDown);
    }

    #[test]
    fn cooldown_stops_after_patience_epochs() {
        let cfg = ScheduleConfig::adaptive();
        let mut losses = vec![1.0, 0.8, 0.5, 0.6];
        losses.extend(std::iter::repeat_n(0.7, 7));
        let (state, d) = run(&cfg, &losses);
        assert_eq!(state.stop_epoch, Some(4 + 7));
        assert_eq!(*d.last().unwrap(), EpochDecision::Stop);
    }

    #[test]
    fn warmup_ignores_non_improvement() {
        let cfg = ScheduleConfig::adaptive();
        let (state, d) = run(&cfg, &[1.0, 1.2]);
        assert_eq!(d, vec![EpochDecision::Continue; 2]);
        assert_eq!(state.phase, Phase::Constant);
    }

    #[test]
    fn nan_loss_is_an_error() {
        let cfg = ScheduleConfig::adaptive();
        let state = ScheduleState::new(&cfg);
        assert!(matches!(
            state.observe_validation_loss(&cfg, f64::NAN),
            Err(ScheduleError::NonFiniteLoss(_, 1))
        ));
    }

    #[test]
    fn trace_examples() {
        let t = schedule_trace(&ScheduleConfig::stable(), &[], None).unwrap();
        assert_eq!(t.stop_epoch, Some(20));
        assert_eq!(t.lr_curve.len(), 20);
        assert_eq!(*t.lr_curve.last().unwrap(), 0.0);

        let p0 = ScheduleConfig::adaptive_with(0, CooldownShape::Linear, true);
        let t = schedule_trace(&p0, &[1.0, 0.9, 1.1], None).unwrap();
        assert_eq!(t.stop_epoch, Some(3));

        let losses: Vec<f64> = (0..30).map(|i| 1.0 - 0.01 * f64::from(i)).collect();
        let t = schedule_trace(&ScheduleConfig::adaptive(), &losses, Some(30)).unwrap();
        assert!(t.cap_reached);
        assert_eq!(t.stop_epoch, None);

        assert_eq!(
            schedule_trace(&ScheduleConfig::adaptive(), &losses, None),
            Err(ScheduleError::LossesExhausted(30))
        );
    }

    #[test]
    fn config_validation() {
        assert!(ScheduleConfig::fixed(2, DecayShape::Linear).validate().is_err());
        assert!(ScheduleConfig::fixed(10, DecayShape::Hybrid { patience: 8 })
            .validate()
            .is_err());
        assert!(ScheduleConfig::fixed(10, DecayShape::Hybrid { patience: 7 })
            .validate()
            .is_ok());
        assert!(ScheduleConfig::adaptive().with_max_lr(-1e-5).validate().is_err());
    }

    #[test]
    fn zero_warmup_starts_at_max_lr() {
        let cfg = ScheduleConfig::adaptive().with_warmup(0);
        let state = ScheduleState::new(&cfg);
        assert_eq!(state.lr_at(&cfg, 0.0).unwrap(), cfg.max_lr);
        let cfg = ScheduleConfig::original().with_warmup(0);
        let state = ScheduleState::new(&cfg);
        assert!(close(state.lr_at(&cfg, 1.0).unwrap(), cfg.max_lr * 0.8));
    }
}

//! Paired standard / fabrication-aware optimization runs from a shared start.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::em::FomValue;
use crate::faid::{FaidError, GradientMethod, Pipeline, Stencil};
use crate::geometry::DesignParams;
use crate::optim::{minimize, OptConfig, OptStep, Termination};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T = f64> {
    pub iteration: usize,
    pub p: Vec<T>,
    /// Through the identity model.
    pub ideal_fom: FomValue<T>,
    /// Through the campaign's litho model.
    pub predicted_fom: FomValue<T>,
    pub grad_norm: T,
    pub step: T,
    /// EM solves since the run started.
    pub em_solves: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T = f64> {
    pub records: Vec<IterationRecord<T>>,
    pub final_p: Vec<T>,
    pub termination: Termination,
    pub method: GradientMethod,
}

/// Ideal and predicted figures of merit of one design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEval<T = f64> {
    pub ideal: FomValue<T>,
    pub predicted: FomValue<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult<T = f64> {
    pub id_run: RunTrace<T>,
    pub faid_run: RunTrace<T>,
    pub id_final: CrossEval<T>,
    pub faid_final: CrossEval<T>,
    pub fingerprint: String,
}

/// Which litho model a single run optimizes against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Id,
    Faid,
}

/// Stable hash of everything that must match between the two runs.
pub fn fingerprint<T: Real>(model: &Pipeline<T>, p0: &DesignParams<T>, cfg: &OptConfig<T>) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{}|{:?}",
        model.device, model.grid, model.materials, model.wavelengths, model.pml, p0, cfg, model.litho.name(), model.mask_step
    );
    hex::encode(&Sha256::digest(s.as_bytes())[..8])
}

/// One optimization run. `model` is the campaign's prediction pipeline; the
/// objective goes through it (FAID) or through its identity twin (ID). Both
/// figures of merit are recorded at every accepted iterate.
pub fn run_single<T: Real>(
    model: &Pipeline<T>,
    p0: &DesignParams<T>,
    cfg: &OptConfig<T>,
    mode: RunMode,
    h: T,
) -> Result<RunTrace<T>, FaidError> {
    cfg.validate().map_err(FaidError::Config)?;
    let ideal = model.ideal();
    let (objective_pipe, other) = match mode {
        RunMode::Id => (&ideal, model),
        RunMode::Faid => (model, &ideal),
    };
    let method = if objective_pipe.litho.differentiable() { GradientMethod::ChainRule } else { GradientMethod::NumericPerturbation };
    let start = model.em_solves();
    let mut records = Vec::new();
    let mut failure: Option<FaidError> = None;

    let result = minimize(
        |p: &[T]| {
            let r = match method {
                GradientMethod::ChainRule => objective_pipe.grad_chain_rule(p),
                _ => objective_pipe.grad_numeric_perturbation(p, h, Stencil::Central),
            };
            match r {
                Ok(r) => {
                    Ok((T::one() - r.fom.transmission, r.grad.iter().map(|&g| -g).collect()))
                }
                Err(e) => {
                    let msg = e.to_string();
                    failure = Some(e);
                    Err(msg)
                }
            }
        },
        p0.values(),
        p0.lower(),
        p0.upper(),
        cfg,
        |st: &OptStep<T>| {
            let own = FomValue::from_transmission(T::one() - st.objective);
            let cross = other.eval_fom(&st.p).map_err(|e| e.to_string())?;
            let (ideal_fom, predicted_fom) = match mode {
                RunMode::Id => (own, cross),
                RunMode::Faid => (cross, own),
            };
            log::info!(
                "{:?} iter {}: ideal {:.4} dB, predicted {:.4} dB, |g| {:.3e}",
                mode,
                st.iteration,
                ideal_fom.insertion_loss_db,
                predicted_fom.insertion_loss_db,
                st.grad_norm.to_f64_lossy()
            );
            records.push(IterationRecord {
                iteration: st.iteration,
                p: st.p.clone(),
                ideal_fom,
                predicted_fom,
                grad_norm: st.grad_norm,
                step: st.step,
                em_solves: model.em_solves() - start,
            });
            Ok(())
        },
    );
    if let (Termination::ObjectiveFailed(_), Some(e)) = (&result.termination, failure) {
        if records.is_empty() {
            return Err(e);
        }
        log::error!("run stopped early: {e}");
    }
    Ok(RunTrace { records, final_p: result.p, termination: result.termination, method })
}

/// ID and FAID runs from the same start, then cross-evaluation of both final designs.
pub fn run_campaign<T: Real>(
    model: &Pipeline<T>,
    p0: &DesignParams<T>,
    cfg: &OptConfig<T>,
    h: T,
) -> Result<CampaignResult<T>, FaidError> {
    let id_run = run_single(model, p0, cfg, RunMode::Id, h)?;
    let faid_run = run_single(model, p0, cfg, RunMode::Faid, h)?;
    let cross = |p: &[T]| -> Result<CrossEval<T>, FaidError> {
        Ok(CrossEval { ideal: model.ideal().eval_fom(p)?, predicted: model.eval_fom(p)? })
    };
    Ok(CampaignResult {
        id_final: cross(&id_run.final_p)?,
        faid_final: cross(&faid_run.final_p)?,
        id_run,
        faid_run,
        fingerprint: fingerprint(model, p0, cfg),
    })
}

/// `iter,ideal_loss_db,predicted_loss_db,grad_norm,step,em_solves` with a fingerprint comment line.
pub fn trace_csv<T: Real>(trace: &RunTrace<T>, fingerprint: &str) -> String {
    let mut s = format!("# fingerprint={fingerprint}\niter,ideal_loss_db,predicted_loss_db,grad_norm,step,em_solves\n");
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.iteration,
            r.ideal_fom.insertion_loss_db.to_f64_lossy(),
            r.predicted_fom.insertion_loss_db.to_f64_lossy(),
            r.grad_norm.to_f64_lossy(),
            r.step.to_f64_lossy(),
            r.em_solves
        );
    }
    s
}

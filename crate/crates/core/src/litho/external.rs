use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::geometry::DensityGrid;
use crate::io;
use crate::litho::{LithoError, LithoModel};
use crate::scalar::Real;

/// Out-of-process predictor settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalConfig {
    /// Command line; `{input}` and `{output}` are replaced by the exchange file paths.
    pub command: String,
    pub exchange_dir: PathBuf,
    pub timeout: Duration,
}

/// Predictor run as a subprocess exchanging DensityGrid text files. Calls on one
/// instance are serialized.
#[derive(Debug)]
pub struct ExternalPredictor {
    pub config: ExternalConfig,
    lock: Mutex<()>,
    calls: AtomicU64,
}

impl ExternalPredictor {
    pub fn new(config: ExternalConfig) -> Result<Self, LithoError> {
        if config.command.split_whitespace().next().is_none() {
            return Err(LithoError::Config("external predictor command is empty".into()));
        }
        if config.timeout.is_zero() {
            return Err(LithoError::Config("external predictor timeout must be positive".into()));
        }
        std::fs::create_dir_all(&config.exchange_dir).map_err(LithoError::Exchange)?;
        Ok(Self { config, lock: Mutex::new(()), calls: AtomicU64::new(0) })
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<T: Real> LithoModel<T> for ExternalPredictor {
    fn name(&self) -> String {
        format!("external({})", self.config.command)
    }

    fn predict(&self, mask: &DensityGrid<T>) -> Result<DensityGrid<T>, LithoError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let n = self.calls.fetch_add(1, Ordering::Relaxed);
        let dir = &self.config.exchange_dir;
        let input = dir.join(format!("mask_{n}.fdg"));
        let output = dir.join(format!("pred_{n}.fdg"));
        let errlog = dir.join(format!("stderr_{n}.log"));
        io::write_density(&input, mask, false).map_err(LithoError::Exchange)?;
        let _ = std::fs::remove_file(&output);

        let args: Vec<String> = self
            .config
            .command
            .split_whitespace()
            .map(|a| a.replace("{input}", &input.to_string_lossy()).replace("{output}", &output.to_string_lossy()))
            .collect();
        let stderr = std::fs::File::create(&errlog).map_err(LithoError::Exchange)?;
        let mut child = Command::new(&args[0])
            .args(&args[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(stderr)
            .spawn()
            .map_err(|source| LithoError::ExternalSpawn { command: args[0].clone(), source })?;

        let start = Instant::now();
        let status = loop {
            match child.try_wait().map_err(LithoError::Exchange)? {
                Some(status) => break status,
                None if start.elapsed() >= self.config.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(LithoError::ExternalTimeout { seconds: self.config.timeout.as_secs_f64() });
                }
                None => std::thread::sleep(Duration::from_millis(2)),
            }
        };
        if !status.success() {
            let text = std::fs::read_to_string(&errlog).unwrap_or_default();
            let tail: String = text.chars().rev().take(400).collect::<Vec<_>>().into_iter().rev().collect();
            return Err(LithoError::ExternalPredictorFailed { status: status.to_string(), stderr: tail.trim().to_string() });
        }
        let pred: DensityGrid<T> = io::read_density(&output).map_err(LithoError::ExternalOutput)?;
        if !pred.grid.same_shape(&mask.grid) {
            return Err(LithoError::ExternalShape {
                expected_nx: mask.grid.nx,
                expected_ny: mask.grid.ny,
                nx: pred.grid.nx,
                ny: pred.grid.ny,
            });
        }
        for p in [&input, &output, &errlog] {
            let _ = std::fs::remove_file(p);
        }
        Ok(DensityGrid { grid: mask.grid, values: pred.values })
    }
}

//! Denoising methods behind one trait, looked up by name at runtime.

use crate::denoiser::DenoiserParams;
use crate::error::{Result, RfrError};
use crate::finetune::{self, FineTuneConfig, FineTuneResult, FlowMode};
use crate::frame::Frame;
use crate::noise::NoiseSpec;
use crate::video::VideoSequence;

/// Everything a method may read. Methods never mutate `theta0`.
pub struct MethodContext<'a> {
    pub theta0: &'a DenoiserParams,
    pub noisy: &'a VideoSequence,
    pub clean: Option<&'a [Frame]>,
    pub config: &'a FineTuneConfig,
    pub test_noise: &'a NoiseSpec,
    pub search_radius: i64,
}

pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, ctx: &MethodContext<'_>) -> Result<FineTuneResult>;
}

pub struct Baseline;
pub struct Online;
pub struct Offline;
pub struct F2fOracle;
pub struct F2fBlockMatch;

impl Method for Baseline {
    fn name(&self) -> &'static str {
        "baseline"
    }
    fn description(&self) -> &'static str {
        "pretrained network, no adaptation"
    }
    fn run(&self, ctx: &MethodContext<'_>) -> Result<FineTuneResult> {
        finetune::baseline(ctx.theta0, ctx.noisy, ctx.clean)
    }
}

impl Method for Online {
    fn name(&self) -> &'static str {
        "online"
    }
    fn description(&self) -> &'static str {
        "sequential restore-from-restored, one step per frame"
    }
    fn run(&self, ctx: &MethodContext<'_>) -> Result<FineTuneResult> {
        finetune::run_online(ctx.theta0, ctx.noisy, ctx.config, ctx.test_noise, ctx.clean)
    }
}

impl Method for Offline {
    fn name(&self) -> &'static str {
        "offline"
    }
    fn description(&self) -> &'static str {
        "K whole-video restore-from-restored iterations"
    }
    fn run(&self, ctx: &MethodContext<'_>) -> Result<FineTuneResult> {
        finetune::finetune_offline(ctx.theta0, ctx.noisy, ctx.config, ctx.test_noise, ctx.clean)
    }
}

impl Method for F2fOracle {
    fn name(&self) -> &'static str {
        "f2f_oracle"
    }
    fn description(&self) -> &'static str {
        "frame-to-frame with ground-truth motion"
    }
    fn run(&self, ctx: &MethodContext<'_>) -> Result<FineTuneResult> {
        finetune::finetune_f2f(ctx.theta0, ctx.noisy, FlowMode::Oracle, ctx.config, ctx.clean)
    }
}

impl Method for F2fBlockMatch {
    fn name(&self) -> &'static str {
        "f2f_blockmatch"
    }
    fn description(&self) -> &'static str {
        "frame-to-frame with global block-matching alignment"
    }
    fn run(&self, ctx: &MethodContext<'_>) -> Result<FineTuneResult> {
        let flow = FlowMode::BlockMatch {
            search_radius: ctx.search_radius,
        };
        finetune::finetune_f2f(ctx.theta0, ctx.noisy, flow, ctx.config, ctx.clean)
    }
}

pub struct MethodRegistry {
    methods: Vec<Box<dyn Method>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        MethodRegistry { methods: Vec::new() }
    }

    /// Registers a method; a later registration under the same name replaces
    /// the earlier one.
    pub fn register(&mut self, method: Box<dyn Method>) {
        if let Some(slot) = self.methods.iter_mut().find(|m| m.name() == method.name()) {
            *slot = method;
        } else {
            self.methods.push(method);
        }
    }

    pub fn get(&self, name: &str) -> Result<&dyn Method> {
        self.methods
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
            .ok_or_else(|| RfrError::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.iter().map(|m| m.name()).collect()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        let mut r = MethodRegistry::empty();
        r.register(Box::new(Baseline));
        r.register(Box::new(Online));
        r.register(Box::new(Offline));
        r.register(Box::new(F2fOracle));
        r.register(Box::new(F2fBlockMatch));
        r
    }
}

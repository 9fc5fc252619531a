//! Mapping failures to exit codes: 2 for bad input, 1 for everything else.

use std::fmt;

use wayfind_core::dataset::DatasetError;
use wayfind_core::evaluation::EvalError;
use wayfind_core::experiments::ExperimentError;
use wayfind_core::mapping::MappingError;
use wayfind_core::models::ModelError;
use wayfind_core::network::NetworkError;
use wayfind_core::synth::SynthError;
use wayfind_core::textio::FileError;

pub const INPUT: i32 = 2;
pub const RUNTIME: i32 = 1;

/// A problem with the command line or input files found by the CLI itself.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn model(e: &ModelError) -> bool {
    !matches!(e, ModelError::NonFinite { .. })
}

fn mapping(e: &MappingError) -> bool {
    !matches!(e, MappingError::OutsideBands { .. })
}

fn eval(e: &EvalError) -> bool {
    match e {
        EvalError::Model(m) => model(m),
        EvalError::LengthMismatch { .. } | EvalError::UnknownLabel(_) => false,
        _ => true,
    }
}

fn is_input(err: &anyhow::Error) -> bool {
    if err.is::<InputError>() || err.is::<FileError>() || err.is::<NetworkError>() || err.is::<DatasetError>() {
        return true;
    }
    if let Some(e) = err.downcast_ref::<MappingError>() {
        return mapping(e);
    }
    if let Some(e) = err.downcast_ref::<ModelError>() {
        return model(e);
    }
    if let Some(e) = err.downcast_ref::<EvalError>() {
        return eval(e);
    }
    if let Some(e) = err.downcast_ref::<ExperimentError>() {
        return match e {
            ExperimentError::Model(m) => model(m),
            ExperimentError::Eval(v) => eval(v),
            _ => true,
        };
    }
    if let Some(e) = err.downcast_ref::<SynthError>() {
        return match e {
            SynthError::Mapping(m) => mapping(m),
            _ => true,
        };
    }
    false
}

pub fn code(err: &anyhow::Error) -> i32 {
    if is_input(err) {
        INPUT
    } else {
        RUNTIME
    }
}

/// `error: <input|runtime>: <message>` on one line.
pub fn render(err: &anyhow::Error) -> String {
    let kind = if code(err) == INPUT { "input" } else { "runtime" };
    let mut msg = String::new();
    for cause in err.chain() {
        let c = cause.to_string();
        if msg.contains(&c) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&c);
    }
    let msg = msg.replace(['\n', '\r'], " ");
    format!("error: {kind}: {msg}")
}

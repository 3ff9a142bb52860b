//! Running targets: in-process instrumented functions and external commands.

mod external;
pub mod minijs;
pub mod plist;
mod sink;

use std::any::Any;
use std::cell::{Cell, RefCell};
use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Once;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::coverage::{fnv1a, signature, CoverageMap, Signature, FNV_OFFSET};

pub use external::COV_FILE_ENV;
pub use sink::{block_id, BlockId, CoverageSink, Stage, Timeout};

/// Declares instrumentation blocks: one `BlockId` constant per label plus an
/// `INVENTORY` slice of `(id, label, stage)`.
#[macro_export]
macro_rules! define_blocks {
    ($($stage:ident { $($name:ident = $label:literal),* $(,)? })*) => {
        $($(
            pub const $name: $crate::harness::BlockId = $crate::harness::BlockId::new($label);
        )*)*
        pub const INVENTORY: &[($crate::harness::BlockId, &str, $crate::harness::Stage)] = &[
            $($(($name, $label, $crate::harness::Stage::$stage),)*)*
        ];
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExecStatus {
    Ok,
    Crash,
    Hang,
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecStatus::Ok => "ok",
            ExecStatus::Crash => "crash",
            ExecStatus::Hang => "hang",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExecResult {
    pub status: ExecStatus,
    pub map: CoverageMap,
    pub exec_micros: u64,
    /// Stable identifier of the failure site, for crashes.
    pub crash_token: Option<String>,
}

impl ExecResult {
    pub fn is_fault(&self) -> bool {
        self.status != ExecStatus::Ok
    }

    /// Coverage signature, with crashes and hangs kept apart from every
    /// normal execution.
    pub fn signature(&self) -> Signature {
        let base = signature(&self.map);
        match self.status {
            ExecStatus::Ok => base,
            ExecStatus::Crash => Signature(fnv1a(base.0 ^ 0x6372_6173_6800, b"crash")),
            ExecStatus::Hang => Signature(fnv1a(base.0 ^ 0x6861_6e67_0000, b"hang")),
        }
    }

    /// File name used when persisting this fault.
    pub fn fault_key(&self) -> String {
        match (&self.status, &self.crash_token) {
            (ExecStatus::Crash, Some(t)) => t.clone(),
            (ExecStatus::Hang, _) => format!("hang-{}", signature(&self.map)),
            _ => format!("crash-{}", signature(&self.map)),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown target '{0}'")]
    UnknownTarget(String),
    #[error("external command is empty")]
    EmptyCommand,
    #[error("timeout must be positive")]
    ZeroTimeout,
    #[error("failed to run target: {0}")]
    Io(#[from] std::io::Error),
    #[error("coverage file {path}: {reason}")]
    CoverageFile { path: String, reason: String },
}

/// Instrumented in-process target.
pub type TargetFn = fn(&[u8], &mut CoverageSink);

fn spin(_input: &[u8], sink: &mut CoverageSink) {
    const LOOP: BlockId = BlockId::new("spin.loop");
    loop {
        sink.hit(LOOP);
    }
}

/// Built-in targets by name. `spin` never returns and exists to exercise
/// timeouts.
pub const BUILTIN_TARGETS: &[(&str, TargetFn)] = &[("plist", plist::run), ("minijs", minijs::run), ("spin", spin)];

pub fn builtin_target(name: &str) -> Option<TargetFn> {
    BUILTIN_TARGETS.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
}

#[derive(Clone)]
pub enum TargetKind {
    InProcess(TargetFn),
    Command(Vec<String>),
}

impl fmt::Debug for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::InProcess(_) => f.write_str("InProcess"),
            TargetKind::Command(argv) => write!(f, "Command({argv:?})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TargetSpec {
    pub name: String,
    pub kind: TargetKind,
    pub timeout: Duration,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(1000);

impl TargetSpec {
    /// A bundled in-process target.
    pub fn builtin(name: &str) -> Result<Self, HarnessError> {
        let f = builtin_target(name).ok_or_else(|| HarnessError::UnknownTarget(name.to_string()))?;
        Ok(Self::in_process(name, f))
    }

    pub fn in_process(name: &str, f: TargetFn) -> Self {
        TargetSpec { name: name.to_string(), kind: TargetKind::InProcess(f), timeout: DEFAULT_TIMEOUT }
    }

    /// External command; an argument containing `@@` receives the input
    /// file path, otherwise the input is piped to stdin.
    pub fn command(argv: Vec<String>) -> Result<Self, HarnessError> {
        if argv.is_empty() || argv[0].is_empty() {
            return Err(HarnessError::EmptyCommand);
        }
        Ok(TargetSpec { name: argv[0].clone(), kind: TargetKind::Command(argv), timeout: DEFAULT_TIMEOUT })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// A fresh execution slot. Each worker owns one.
    pub fn executor(&self) -> Result<Box<dyn Executor>, HarnessError> {
        if self.timeout.is_zero() {
            return Err(HarnessError::ZeroTimeout);
        }
        Ok(match &self.kind {
            TargetKind::InProcess(f) => Box::new(InProcessExecutor { f: *f, timeout: self.timeout }),
            TargetKind::Command(argv) => Box::new(external::CommandExecutor::new(argv.clone(), self.timeout)?),
        })
    }
}

pub trait Executor: Send {
    fn execute(&mut self, input: &[u8]) -> Result<ExecResult, HarnessError>;
}

/// One-shot convenience wrapper around [`TargetSpec::executor`].
pub fn execute(t: &TargetSpec, input: &[u8]) -> Result<ExecResult, HarnessError> {
    t.executor()?.execute(input)
}

thread_local! {
    static IN_TARGET: Cell<bool> = const { Cell::new(false) };
    static PANIC_SITE: RefCell<Option<String>> = const { RefCell::new(None) };
}

static HOOK: Once = Once::new();

fn install_panic_hook() {
    HOOK.call_once(|| {
        let prev = panic::take_hook();
        panic::set_hook(Box::new(move |info| {
            if IN_TARGET.with(Cell::get) {
                let site = info.location().map(|l| {
                    let stem = l.file().rsplit(['/', '\\']).next().unwrap_or(l.file());
                    format!("{}-{}", stem.trim_end_matches(".rs"), l.line())
                });
                PANIC_SITE.with(|s| *s.borrow_mut() = site);
            } else {
                prev(info);
            }
        }));
    });
}

fn panic_message(payload: &(dyn Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        String::new()
    }
}

/// `site-xxxxxxxx`: the panic location plus a hash of the message with
/// digits removed, so varying indices do not split one bug in two.
fn crash_token(site: Option<String>, message: &str) -> String {
    let stable: Vec<u8> = message.bytes().filter(|b| !b.is_ascii_digit()).collect();
    let h = fnv1a(FNV_OFFSET, &stable) as u32;
    format!("{}-{h:08x}", site.unwrap_or_else(|| "panic".into()))
}

struct InProcessExecutor {
    f: TargetFn,
    timeout: Duration,
}

impl Executor for InProcessExecutor {
    fn execute(&mut self, input: &[u8]) -> Result<ExecResult, HarnessError> {
        install_panic_hook();
        let start = Instant::now();
        let mut sink = CoverageSink::new(Some(start + self.timeout));
        IN_TARGET.with(|c| c.set(true));
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| (self.f)(input, &mut sink)));
        IN_TARGET.with(|c| c.set(false));
        let exec_micros = start.elapsed().as_micros() as u64;
        let site = PANIC_SITE.with(|s| s.borrow_mut().take());
        let (status, crash_token) = match outcome {
            Ok(()) => (ExecStatus::Ok, None),
            Err(p) if p.is::<Timeout>() => (ExecStatus::Hang, None),
            Err(p) => (ExecStatus::Crash, Some(crash_token(site, &panic_message(p.as_ref())))),
        };
        let exec_micros = match status {
            ExecStatus::Hang => exec_micros.max(self.timeout.as_micros() as u64),
            _ => exec_micros,
        };
        Ok(ExecResult { status, map: sink.into_map(), exec_micros, crash_token })
    }
}

/// Runs `f` with a tracing sink and returns the visited block ids.
pub fn trace(f: TargetFn, input: &[u8]) -> (ExecStatus, Vec<BlockId>) {
    install_panic_hook();
    let mut sink = CoverageSink::tracing();
    IN_TARGET.with(|c| c.set(true));
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| f(input, &mut sink)));
    IN_TARGET.with(|c| c.set(false));
    PANIC_SITE.with(|s| s.borrow_mut().take());
    let status = match outcome {
        Ok(()) => ExecStatus::Ok,
        Err(p) if p.is::<Timeout>() => ExecStatus::Hang,
        Err(_) => ExecStatus::Crash,
    };
    (status, sink.take_trace())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boom(input: &[u8], sink: &mut CoverageSink) {
        sink.hit(BlockId::new("boom.enter"));
        if input.first() == Some(&b'!') {
            let v: Vec<u8> = Vec::new();
            let _ = v[input.len()];
        }
        sink.hit(BlockId::new("boom.exit"));
    }

    #[test]
    fn crash_then_normal() {
        let t = TargetSpec::in_process("boom", boom);
        let mut ex = t.executor().unwrap();
        let a = ex.execute(b"!x").unwrap();
        let b = ex.execute(b"!xyz").unwrap();
        assert_eq!(a.status, ExecStatus::Crash);
        // Index differs, token does not.
        assert_eq!(a.crash_token, b.crash_token);
        let ok = ex.execute(b"fine").unwrap();
        assert_eq!(ok.status, ExecStatus::Ok);
        assert_eq!(ok.map, ex.execute(b"fine").unwrap().map);
        assert_ne!(ok.signature(), a.signature());
    }

    #[test]
    fn spin_hangs() {
        let t = TargetSpec::builtin("spin").unwrap().with_timeout(Duration::from_millis(50));
        let r = execute(&t, b"").unwrap();
        assert_eq!(r.status, ExecStatus::Hang);
        assert!(r.exec_micros >= 50_000);
    }

    #[test]
    fn unknown_and_invalid_specs() {
        assert!(matches!(TargetSpec::builtin("nope"), Err(HarnessError::UnknownTarget(_))));
        assert!(matches!(TargetSpec::command(vec![]), Err(HarnessError::EmptyCommand)));
        let t = TargetSpec::builtin("plist").unwrap().with_timeout(Duration::ZERO);
        assert!(matches!(t.executor(), Err(HarnessError::ZeroTimeout)));
    }
}

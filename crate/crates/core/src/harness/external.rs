use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use tempfile::TempDir;

use super::{ExecResult, ExecStatus, Executor, HarnessError};
use crate::coverage::CoverageMap;

/// Environment variable naming the file an external target writes its raw
/// coverage map to.
pub const COV_FILE_ENV: &str = "GRAMFUZZ_COV_FILE";

pub(super) struct CommandExecutor {
    argv: Vec<String>,
    timeout: Duration,
    dir: TempDir,
}

impl CommandExecutor {
    pub(super) fn new(argv: Vec<String>, timeout: Duration) -> Result<Self, HarnessError> {
        Ok(CommandExecutor { argv, timeout, dir: tempfile::tempdir()? })
    }

    fn input_path(&self) -> PathBuf {
        self.dir.path().join("input")
    }

    fn cov_path(&self) -> PathBuf {
        self.dir.path().join("coverage")
    }

    fn read_map(&self) -> Result<CoverageMap, String> {
        let bytes = fs::read(self.cov_path()).map_err(|e| e.to_string())?;
        CoverageMap::from_bytes(&bytes).map_err(|e| e.to_string())
    }
}

#[cfg(unix)]
fn killed_by_signal(status: &std::process::ExitStatus) -> Option<i32> {
    use std::os::unix::process::ExitStatusExt;
    status.signal()
}

#[cfg(not(unix))]
fn killed_by_signal(_status: &std::process::ExitStatus) -> Option<i32> {
    None
}

impl Executor for CommandExecutor {
    fn execute(&mut self, input: &[u8]) -> Result<ExecResult, HarnessError> {
        let input_path = self.input_path();
        let cov_path = self.cov_path();
        fs::write(&input_path, input)?;
        let _ = fs::remove_file(&cov_path);

        let path_str = input_path.to_string_lossy().into_owned();
        let uses_file = self.argv.iter().any(|a| a.contains("@@"));
        let mut cmd = Command::new(&self.argv[0]);
        cmd.args(self.argv[1..].iter().map(|a| a.replace("@@", &path_str)))
            .env(super::COV_FILE_ENV, &cov_path)
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .stdin(if uses_file { Stdio::null() } else { Stdio::piped() });

        let start = Instant::now();
        let mut child = cmd.spawn()?;
        let feeder = child.stdin.take().map(|mut stdin| {
            let data = input.to_vec();
            thread::spawn(move || {
                let _ = stdin.write_all(&data);
            })
        });

        let status = loop {
            if let Some(st) = child.try_wait()? {
                break Some(st);
            }
            if start.elapsed() >= self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            thread::sleep(Duration::from_micros(200));
        };
        if let Some(f) = feeder {
            let _ = f.join();
        }
        let exec_micros = start.elapsed().as_micros() as u64;

        let (status, crash_token) = match status {
            None => (ExecStatus::Hang, None),
            Some(st) => match killed_by_signal(&st) {
                Some(sig) => (ExecStatus::Crash, Some(format!("signal-{sig}"))),
                None => (ExecStatus::Ok, None),
            },
        };
        let map = match (self.read_map(), &status) {
            (Ok(m), _) => m,
            (Err(_), ExecStatus::Crash | ExecStatus::Hang) => CoverageMap::new(),
            (Err(reason), ExecStatus::Ok) => {
                return Err(HarnessError::CoverageFile { path: cov_path.display().to_string(), reason })
            }
        };
        let exec_micros = match status {
            ExecStatus::Hang => exec_micros.max(self.timeout.as_micros() as u64),
            _ => exec_micros,
        };
        Ok(ExecResult { status, map, exec_micros, crash_token })
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::super::{execute, TargetSpec};
    use super::*;
    use crate::coverage::MAP_SIZE;

    fn sh(script: &str) -> TargetSpec {
        TargetSpec::command(vec!["sh".into(), "-c".into(), script.into(), "sh".into(), "@@".into()]).unwrap()
    }

    #[test]
    fn reads_map_from_side_channel() {
        let script = format!("head -c {MAP_SIZE} /dev/zero | tr '\\0' '\\1' > \"${COV_FILE_ENV}\"");
        let r = execute(&sh(&script), b"x").unwrap();
        assert_eq!(r.status, ExecStatus::Ok);
        assert_eq!(r.map.edge_count(), MAP_SIZE);
    }

    #[test]
    fn missing_map_is_an_error() {
        assert!(matches!(execute(&sh("true"), b"x"), Err(HarnessError::CoverageFile { .. })));
        assert!(matches!(execute(&sh("printf abc > \"$GRAMFUZZ_COV_FILE\""), b"x"), Err(HarnessError::CoverageFile { .. })));
    }

    #[test]
    fn signal_is_crash_and_sleep_is_hang() {
        let r = execute(&sh("kill -SEGV $$"), b"x").unwrap();
        assert_eq!(r.status, ExecStatus::Crash);
        assert_eq!(r.crash_token.as_deref(), Some("signal-11"));
        let t = sh("sleep 5").with_timeout(Duration::from_millis(100));
        let r = execute(&t, b"x").unwrap();
        assert_eq!(r.status, ExecStatus::Hang);
        assert!(r.exec_micros >= 100_000);
    }

    #[test]
    fn input_reaches_file_and_stdin() {
        let script = "if [ \"$(cat \"$1\")\" = hello ]; then head -c 65536 /dev/zero > \"$GRAMFUZZ_COV_FILE\"; fi";
        assert!(execute(&sh(script), b"hello").is_ok());
        let t = TargetSpec::command(vec![
            "sh".into(),
            "-c".into(),
            "if [ \"$(cat)\" = hi ]; then head -c 65536 /dev/zero > \"$GRAMFUZZ_COV_FILE\"; fi".into(),
        ])
        .unwrap();
        assert!(execute(&t, b"hi").is_ok());
        assert!(execute(&t, b"nope").is_err());
    }
}

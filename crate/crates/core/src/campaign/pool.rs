use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crate::harness::{ExecResult, Executor, HarnessError, TargetSpec};

/// Stack size for threads that run targets or build parse trees.
pub const STACK_SIZE: usize = 256 << 20;

type Job = (usize, Arc<Vec<u8>>);
type Done = (usize, Result<ExecResult, HarnessError>);

/// Runs inputs on one inline executor, or spread over worker threads.
/// Results always come back in submission order.
pub(super) enum ExecPool {
    Inline(Box<dyn Executor>),
    Workers { jobs: Vec<Sender<Job>>, done: Receiver<Done>, handles: Vec<JoinHandle<()>> },
}

impl ExecPool {
    pub(super) fn new(target: &TargetSpec, workers: usize) -> Result<Self, HarnessError> {
        if workers <= 1 {
            return Ok(ExecPool::Inline(target.executor()?));
        }
        let (done_tx, done) = channel::<Done>();
        let mut jobs = Vec::new();
        let mut handles = Vec::new();
        for i in 0..workers {
            let mut ex = target.executor()?;
            let (tx, rx) = channel::<Job>();
            let out = done_tx.clone();
            let h = thread::Builder::new()
                .name(format!("worker-{i}"))
                .stack_size(STACK_SIZE)
                .spawn(move || {
                    for (idx, input) in rx {
                        if out.send((idx, ex.execute(&input))).is_err() {
                            break;
                        }
                    }
                })?;
            jobs.push(tx);
            handles.push(h);
        }
        Ok(ExecPool::Workers { jobs, done, handles })
    }

    pub(super) fn run(&mut self, input: &[u8]) -> Result<ExecResult, HarnessError> {
        match self {
            ExecPool::Inline(ex) => ex.execute(input),
            ExecPool::Workers { .. } => self.run_all(&[input.to_vec()]).pop().expect("one result"),
        }
    }

    pub(super) fn run_all(&mut self, inputs: &[Vec<u8>]) -> Vec<Result<ExecResult, HarnessError>> {
        match self {
            ExecPool::Inline(ex) => inputs.iter().map(|i| ex.execute(i)).collect(),
            ExecPool::Workers { jobs, done, .. } => {
                for (i, input) in inputs.iter().enumerate() {
                    jobs[i % jobs.len()].send((i, Arc::new(input.clone()))).expect("worker alive");
                }
                let mut slots: Vec<Option<Result<ExecResult, HarnessError>>> = (0..inputs.len()).map(|_| None).collect();
                for _ in 0..inputs.len() {
                    let (i, r) = done.recv().expect("worker alive");
                    slots[i] = Some(r);
                }
                slots.into_iter().map(|s| s.expect("every job answered")).collect()
            }
        }
    }
}

impl Drop for ExecPool {
    fn drop(&mut self) {
        if let ExecPool::Workers { jobs, handles, .. } = self {
            jobs.clear();
            for h in handles.drain(..) {
                let _ = h.join();
            }
        }
    }
}

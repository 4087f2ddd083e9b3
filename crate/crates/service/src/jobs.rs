use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use apfit_core::orchestrator::{run_fit, FitConfig, FitJob, FitResult, Progress, RunControl};
use serde::Serialize;
use tokio::sync::{watch, Semaphore};
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            JobStatus::Done | JobStatus::Failed | JobStatus::Cancelled
        )
    }
}

/// Mutable part of a job, guarded by the job's mutex.
#[derive(Debug, Clone, Serialize)]
pub struct JobState {
    pub status: JobStatus,
    /// Lowest error after each completed iteration, starting at 0.
    pub progress: Vec<f64>,
    pub result: Option<FitResult>,
    pub error: Option<String>,
}

pub struct Job {
    pub id: String,
    /// Resolved configuration, as echoed in the run details.
    pub config: FitConfig,
    state: Mutex<JobState>,
    cancel: AtomicBool,
    /// Bumped on every state change so progress streams can wake up.
    version: watch::Sender<u64>,
}

/// Serializable snapshot of a job.
#[derive(Debug, Clone, Serialize)]
pub struct JobRecord {
    pub job_id: String,
    pub config: FitConfig,
    #[serde(flatten)]
    pub state: JobState,
}

impl Job {
    fn new(config: FitConfig) -> Self {
        let (version, _) = watch::channel(0);
        Self {
            id: Uuid::new_v4().simple().to_string(),
            config,
            state: Mutex::new(JobState {
                status: JobStatus::Queued,
                progress: Vec::new(),
                result: None,
                error: None,
            }),
            cancel: AtomicBool::new(false),
            version,
        }
    }

    pub fn state(&self) -> JobState {
        self.state.lock().expect("job state lock").clone()
    }

    pub fn record(&self) -> JobRecord {
        JobRecord {
            job_id: self.id.clone(),
            config: self.config.clone(),
            state: self.state(),
        }
    }

    /// Status plus progress entries from `from` onward.
    pub fn progress_since(&self, from: usize) -> (JobStatus, Vec<f64>) {
        let s = self.state.lock().expect("job state lock");
        (
            s.status,
            s.progress.get(from..).unwrap_or_default().to_vec(),
        )
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.version.subscribe()
    }

    fn update(&self, f: impl FnOnce(&mut JobState)) {
        {
            let mut s = self.state.lock().expect("job state lock");
            f(&mut s);
        }
        self.version.send_modify(|v| *v += 1);
    }

    /// Moves to `next` unless the job already reached a terminal status.
    fn advance(&self, next: JobStatus) -> bool {
        let mut moved = false;
        self.update(|s| {
            if !s.status.is_terminal() {
                s.status = next;
                moved = true;
            }
        });
        moved
    }

    /// Requests cancellation; a queued job is cancelled immediately, a
    /// running one at its next iteration boundary.
    pub fn cancel(&self) -> JobStatus {
        self.cancel.store(true, Ordering::Relaxed);
        self.update(|s| {
            if s.status == JobStatus::Queued {
                s.status = JobStatus::Cancelled;
            }
        });
        self.state().status
    }
}

/// In-memory job table plus the limit on concurrently running fits.
#[derive(Clone)]
pub struct Registry {
    jobs: Arc<Mutex<HashMap<String, Arc<Job>>>>,
    slots: Arc<Semaphore>,
    threads: Option<usize>,
}

impl Registry {
    pub fn new(max_concurrent: usize, threads: Option<usize>) -> Self {
        Self {
            jobs: Arc::default(),
            slots: Arc::new(Semaphore::new(max_concurrent.max(1))),
            threads,
        }
    }

    pub fn get(&self, id: &str) -> Option<Arc<Job>> {
        self.jobs.lock().expect("registry lock").get(id).cloned()
    }

    pub fn list(&self) -> Vec<Arc<Job>> {
        self.jobs
            .lock()
            .expect("registry lock")
            .values()
            .cloned()
            .collect()
    }

    /// Registers `job` and starts it once a slot is free.
    pub fn submit(&self, job: FitJob) -> Arc<Job> {
        let record = Arc::new(Job::new(job.config().clone()));
        self.jobs
            .lock()
            .expect("registry lock")
            .insert(record.id.clone(), record.clone());
        let slots = self.slots.clone();
        let threads = self.threads;
        let handle = record.clone();
        tokio::spawn(async move {
            let Ok(_permit) = slots.acquire_owned().await else {
                return;
            };
            if handle.cancel.load(Ordering::Relaxed) || !handle.advance(JobStatus::Running) {
                return;
            }
            let worker = handle.clone();
            let outcome = tokio::task::spawn_blocking(move || {
                let sink = worker.clone();
                run_fit(
                    &job,
                    RunControl {
                        threads,
                        cancel: Some(&worker.cancel),
                        progress: Some(Box::new(move |p: Progress| {
                            sink.update(|s| s.progress.push(p.lowest_error));
                        })),
                    },
                )
            })
            .await;
            handle.update(|s| match outcome {
                Ok(Ok(result)) => {
                    s.status = if result.cancelled {
                        JobStatus::Cancelled
                    } else {
                        JobStatus::Done
                    };
                    s.progress.clone_from(&result.history);
                    s.result = Some(result);
                }
                Ok(Err(e)) => {
                    s.status = JobStatus::Failed;
                    s.error = Some(e.to_string());
                }
                Err(e) => {
                    s.status = JobStatus::Failed;
                    s.error = Some(format!("worker stopped unexpectedly: {e}"));
                }
            });
        });
        record
    }
}

//! HTTP control plane over one [`Session`], plus the pieces the `hearth`
//! binary shares with tests.

pub mod api;
pub mod streams;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use hearth::orchestrator::{OrchestratorError, Session, SessionReport};
use tokio::sync::{watch, Mutex};
use tokio::task::JoinHandle;

pub use api::router;
pub use streams::{StreamEvent, StreamName};

/// Shared between handlers and the cycle runner. Every mutation goes
/// through the session lock, so writes are applied one at a time.
pub struct Hub {
    session: Mutex<Session>,
    running: AtomicBool,
    runner: Mutex<Option<JoinHandle<()>>>,
    changed: watch::Sender<u64>,
    /// Pause between cycles while running.
    pace: Duration,
}

#[derive(Clone)]
pub struct AppState(pub Arc<Hub>);

impl AppState {
    pub fn new(session: Session, pace: Duration) -> Self {
        let (changed, _) = watch::channel(0);
        AppState(Arc::new(Hub {
            session: Mutex::new(session),
            running: AtomicBool::new(false),
            runner: Mutex::new(None),
            changed,
            pace,
        }))
    }

    pub async fn session(&self) -> tokio::sync::MutexGuard<'_, Session> {
        self.0.session.lock().await
    }

    pub fn is_running(&self) -> bool {
        self.0.running.load(Ordering::SeqCst)
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.0.changed.subscribe()
    }

    /// Wakes stream followers after a mutation.
    pub fn touch(&self) {
        self.0.changed.send_modify(|v| *v += 1);
    }

    /// Starts advancing cycles until `until` cycles have run in total.
    /// Returns false when already running.
    pub async fn start(&self, until: u64) -> Result<bool, OrchestratorError> {
        if self.session().await.is_finished() {
            return Err(OrchestratorError::Finished);
        }
        let mut slot = self.0.runner.lock().await;
        if self.0.running.swap(true, Ordering::SeqCst) {
            return Ok(false);
        }
        let state = self.clone();
        *slot = Some(tokio::spawn(async move {
            while state.is_running() {
                let outcome = {
                    let mut s = state.session().await;
                    if s.cycle() >= until {
                        None
                    } else {
                        Some(s.run_cycle())
                    }
                };
                state.touch();
                match outcome {
                    Some(Ok(_)) => tokio::time::sleep(state.0.pace).await,
                    _ => break,
                }
            }
            state.0.running.store(false, Ordering::SeqCst);
            state.touch();
        }));
        Ok(true)
    }

    /// Waits for the runner to reach its target, if one is active.
    pub async fn join(&self) {
        let handle = self.0.runner.lock().await.take();
        if let Some(h) = handle {
            let _ = h.await;
        }
    }

    /// Stops the runner and closes the session with a final anchor.
    pub async fn stop(&self) -> Result<SessionReport, OrchestratorError> {
        self.0.running.store(false, Ordering::SeqCst);
        self.join().await;
        let report = {
            let mut s = self.session().await;
            s.finish()
        };
        self.touch();
        report
    }
}

//! Telemetry queue with an UPLOAD → CONFIRM → WIPE protocol.
//!
//! Records are only ever removed from a batch the cloud has confirmed, and a
//! confirm token can wipe at most once. A failed upload puts the batch back
//! at the head of the queue, so delivery is at-least-once.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::PipelineEvent;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub id: u64,
    pub t: f64,
    pub event: PipelineEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfirmToken(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BatchState {
    Local,
    Uploading,
    Confirmed,
}

#[derive(Debug, Clone, PartialEq)]
struct Batch {
    records: Vec<TelemetryRecord>,
    state: BatchState,
    token: Option<ConfirmToken>,
}

#[derive(Debug, Clone, Default)]
pub struct SyncQueue {
    local: VecDeque<TelemetryRecord>,
    batch: Option<Batch>,
    next_id: u64,
    used_tokens: HashSet<ConfirmToken>,
    wiped: u64,
}

impl SyncQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record in LOCAL state and returns its id.
    pub fn enqueue(&mut self, t: f64, event: PipelineEvent) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.local.push_back(TelemetryRecord { id, t, event });
        id
    }

    /// Records not yet wiped, in-flight batch first.
    pub fn records(&self) -> Vec<&TelemetryRecord> {
        self.batch
            .iter()
            .flat_map(|b| &b.records)
            .chain(&self.local)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.local.len() + self.batch.as_ref().map_or(0, |b| b.records.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn batch_state(&self) -> Option<BatchState> {
        self.batch.as_ref().map(|b| b.state)
    }

    /// Total records removed by confirmed wipes.
    pub fn wiped(&self) -> u64 {
        self.wiped
    }

    /// Snapshots every LOCAL record into a new UPLOADING batch. A batch left
    /// CONFIRMED by an interrupted sync is wiped first. Returns `None` when
    /// there is nothing to send.
    pub fn begin(&mut self) -> Result<Option<Vec<TelemetryRecord>>> {
        if let Some(b) = &self.batch {
            match (b.state, b.token) {
                (BatchState::Confirmed, Some(tok)) => {
                    self.wipe(tok)?;
                }
                _ => return Err(Error::Config("a sync batch is already in flight".into())),
            }
        }
        if self.local.is_empty() {
            return Ok(None);
        }
        let records: Vec<TelemetryRecord> = self.local.drain(..).collect();
        self.batch = Some(Batch {
            records: records.clone(),
            state: BatchState::Uploading,
            token: None,
        });
        Ok(Some(records))
    }

    /// Marks the in-flight batch CONFIRMED under `token`.
    pub fn confirm(&mut self, token: ConfirmToken) -> Result<()> {
        match &mut self.batch {
            Some(b) if b.state == BatchState::Uploading => {
                b.state = BatchState::Confirmed;
                b.token = Some(token);
                Ok(())
            }
            _ => Err(Error::Config("confirm without an uploading batch".into())),
        }
    }

    /// Drops the confirmed batch. A token that already wiped is a no-op
    /// returning 0.
    pub fn wipe(&mut self, token: ConfirmToken) -> Result<usize> {
        if self.used_tokens.contains(&token) {
            return Ok(0);
        }
        match &self.batch {
            Some(b) if b.state == BatchState::Confirmed && b.token == Some(token) => {
                let n = b.records.len();
                self.batch = None;
                self.used_tokens.insert(token);
                self.wiped += n as u64;
                Ok(n)
            }
            _ => Err(Error::Config(format!(
                "token {} does not match a confirmed batch",
                token.0
            ))),
        }
    }

    /// Drops an in-flight batch without a confirmation. Only the scenario
    /// mutation check uses this.
    pub(crate) fn discard_in_flight(&mut self) {
        self.batch = None;
    }

    /// Returns an UPLOADING batch to LOCAL, ahead of anything queued since.
    pub fn fail(&mut self) {
        if let Some(b) = self.batch.take_if(|b| b.state == BatchState::Uploading) {
            for r in b.records.into_iter().rev() {
                self.local.push_front(r);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("upload failed: {0}")]
pub struct CloudError(pub String);

pub trait CloudClient {
    fn upload(
        &mut self,
        batch: &[TelemetryRecord],
    ) -> std::result::Result<ConfirmToken, CloudError>;
    /// Upload attempts so far.
    fn calls(&self) -> u64;
}

/// Where an injected upload failure happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailurePoint {
    /// Rejected before anything reaches the cloud.
    BeforeUpload,
    /// The cloud stores the batch but the acknowledgement is lost.
    DuringUpload,
}

/// In-memory cloud with a failure schedule keyed by call index (0-based).
#[derive(Debug, Clone, Default)]
pub struct SimulatedCloud {
    pub received: Vec<TelemetryRecord>,
    calls: u64,
    failures: BTreeMap<u64, FailurePoint>,
    next_token: u64,
}

impl SimulatedCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn failing_on(failures: impl IntoIterator<Item = (u64, FailurePoint)>) -> Self {
        Self {
            failures: failures.into_iter().collect(),
            ..Self::default()
        }
    }
}

impl CloudClient for SimulatedCloud {
    fn upload(
        &mut self,
        batch: &[TelemetryRecord],
    ) -> std::result::Result<ConfirmToken, CloudError> {
        let call = self.calls;
        self.calls += 1;
        match self.failures.get(&call) {
            Some(FailurePoint::BeforeUpload) => {
                return Err(CloudError(format!("call {call}: connection refused")))
            }
            Some(FailurePoint::DuringUpload) => {
                self.received.extend_from_slice(batch);
                return Err(CloudError(format!("call {call}: acknowledgement lost")));
            }
            None => {}
        }
        self.received.extend_from_slice(batch);
        self.next_token += 1;
        Ok(ConfirmToken(self.next_token))
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SyncOutcome {
    /// Nothing queued; the client was not called.
    Empty,
    Synced {
        wiped: usize,
    },
    /// Upload failed; every record is back in LOCAL state.
    Retryable {
        reason: String,
    },
}

/// One full UPLOAD → CONFIRM → WIPE round.
pub fn sync(queue: &mut SyncQueue, client: &mut dyn CloudClient) -> Result<SyncOutcome> {
    let Some(batch) = queue.begin()? else {
        return Ok(SyncOutcome::Empty);
    };
    match client.upload(&batch) {
        Ok(token) => {
            queue.confirm(token)?;
            let wiped = queue.wipe(token)?;
            Ok(SyncOutcome::Synced { wiped })
        }
        Err(e) => {
            queue.fail();
            Ok(SyncOutcome::Retryable { reason: e.0 })
        }
    }
}

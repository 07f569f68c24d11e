use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::item::{AuditItem, Decision, ItemStatus};
use super::iterate::IterationReport;
use super::AuditError;
use crate::corpus::{NerLabel, SentenceId};

pub const STORE_SCHEMA: &str = "nerboot-audit";
pub const STORE_VERSION: u32 = 1;

/// One line of the store file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Header { schema: String, version: u32 },
    Enqueued { item: AuditItem },
    Decision { item_id: u64, decision: Decision },
    Report { report: IterationReport },
}

/// Everything the store knows, rebuilt from records alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditState {
    pub items: BTreeMap<u64, AuditItem>,
    pub reports: Vec<IterationReport>,
}

impl AuditState {
    fn check(&self, rec: &Record) -> Result<(), AuditError> {
        match rec {
            Record::Header { .. } => Err(AuditError::Store("header record after the first line".into())),
            Record::Enqueued { item } => {
                if self.items.contains_key(&item.item_id) {
                    Err(AuditError::Store(format!("item {} enqueued twice", item.item_id)))
                } else {
                    Ok(())
                }
            }
            Record::Decision { item_id, decision } => self
                .items
                .get(item_id)
                .ok_or(AuditError::NotFound(*item_id))?
                .check_decision(decision),
            Record::Report { .. } => Ok(()),
        }
    }

    fn apply(&mut self, rec: Record) -> Result<(), AuditError> {
        self.check(&rec)?;
        match rec {
            Record::Header { .. } => unreachable!("rejected by check"),
            Record::Enqueued { item } => {
                self.items.insert(item.item_id, item);
            }
            Record::Decision { item_id, decision } => {
                self.items.get_mut(&item_id).expect("checked").apply_decision(decision)?;
            }
            Record::Report { report } => self.reports.push(report),
        }
        Ok(())
    }

    /// Rebuilds state from the text of a store file. A final line without a
    /// newline that does not parse is treated as an interrupted write and
    /// dropped; any other bad line is an error.
    pub fn replay(text: &str) -> Result<(AuditState, usize), AuditError> {
        let mut lines = text.split_inclusive('\n').enumerate().peekable();
        let mut state = AuditState::default();
        let mut valid_len = 0usize;
        match lines.next() {
            None => return Ok((state, 0)),
            Some((_, first)) => {
                match serde_json::from_str::<Record>(first.trim_end()) {
                    Ok(Record::Header { schema, version }) if schema == STORE_SCHEMA && version == STORE_VERSION => {}
                    Ok(Record::Header { schema, version }) => {
                        return Err(AuditError::Store(format!("unsupported store {schema} v{version}")))
                    }
                    _ => return Err(AuditError::Store("missing header line".into())),
                }
                valid_len += first.len();
            }
        }
        while let Some((n, line)) = lines.next() {
            let is_last = lines.peek().is_none();
            if line.trim().is_empty() {
                valid_len += line.len();
                continue;
            }
            match serde_json::from_str::<Record>(line.trim_end()) {
                Ok(rec) => {
                    state
                        .apply(rec)
                        .map_err(|e| AuditError::Store(format!("line {}: {e}", n + 1)))?;
                    valid_len += line.len();
                }
                Err(e) if is_last && !line.ends_with('\n') => {
                    log::warn!("dropping incomplete final store line {}: {e}", n + 1);
                }
                Err(e) => return Err(AuditError::Store(format!("line {}: {e}", n + 1))),
            }
        }
        Ok((state, valid_len))
    }
}

/// Audit items and iteration reports, persisted as an append-only log of
/// JSON lines. Every change is written and flushed before it is applied.
#[derive(Debug)]
pub struct AuditStore {
    path: Option<PathBuf>,
    file: Option<File>,
    state: AuditState,
}

impl AuditStore {
    pub fn in_memory() -> AuditStore {
        AuditStore {
            path: None,
            file: None,
            state: AuditState::default(),
        }
    }

    /// Opens (replaying) or creates the store file at `path`.
    pub fn open(path: &Path) -> Result<AuditStore, AuditError> {
        let io = |e: std::io::Error| AuditError::Store(format!("{}: {e}", path.display()));
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io(e)),
        };
        let (state, valid_len) = AuditState::replay(&text)?;
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if valid_len < text.len() {
            file.set_len(valid_len as u64).map_err(io)?;
        }
        let mut store = AuditStore {
            path: Some(path.to_path_buf()),
            file: Some(file),
            state,
        };
        if text.trim().is_empty() {
            store.write(&Record::Header {
                schema: STORE_SCHEMA.into(),
                version: STORE_VERSION,
            })?;
        }
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn state(&self) -> &AuditState {
        &self.state
    }

    fn write(&mut self, rec: &Record) -> Result<(), AuditError> {
        if let Some(f) = self.file.as_mut() {
            let mut line = serde_json::to_string(rec).expect("records serialize");
            line.push('\n');
            f.write_all(line.as_bytes())
                .and_then(|_| f.sync_data())
                .map_err(|e| AuditError::Store(e.to_string()))?;
        }
        Ok(())
    }

    fn commit(&mut self, rec: Record) -> Result<(), AuditError> {
        self.state.check(&rec)?;
        self.write(&rec)?;
        self.state.apply(rec)
    }

    pub fn item(&self, id: u64) -> Result<&AuditItem, AuditError> {
        self.state.items.get(&id).ok_or(AuditError::NotFound(id))
    }

    pub fn items(&self) -> impl Iterator<Item = &AuditItem> {
        self.state.items.values()
    }

    /// Items with the given status, or every item when `status` is `None`.
    pub fn queue(&self, status: Option<ItemStatus>) -> Vec<&AuditItem> {
        self.items()
            .filter(|i| status.is_none_or(|s| i.status == s))
            .collect()
    }

    pub fn reports(&self) -> &[IterationReport] {
        &self.state.reports
    }

    pub fn enqueue(
        &mut self,
        sentence_id: SentenceId,
        tokens: Vec<String>,
        stored_tags: Vec<NerLabel>,
        predicted_tags: Vec<NerLabel>,
        iteration: usize,
    ) -> Result<AuditItem, AuditError> {
        let id = self.state.items.keys().next_back().map_or(1, |k| k + 1);
        let item = AuditItem::new(id, sentence_id, tokens, stored_tags, predicted_tags, iteration);
        self.commit(Record::Enqueued { item: item.clone() })?;
        Ok(item)
    }

    fn decide(
        &mut self,
        item_id: u64,
        decision: Decision,
        expected_version: Option<u64>,
    ) -> Result<AuditItem, AuditError> {
        let found = self.item(item_id)?.version;
        if let Some(expected) = expected_version {
            if expected != found {
                return Err(AuditError::VersionConflict {
                    item: item_id,
                    expected,
                    found,
                });
            }
        }
        self.commit(Record::Decision { item_id, decision })?;
        Ok(self.state.items[&item_id].clone())
    }

    pub fn record_decision(
        &mut self,
        item_id: u64,
        auditor_id: &str,
        tags: Vec<NerLabel>,
        expected_version: Option<u64>,
    ) -> Result<AuditItem, AuditError> {
        let decision = Decision {
            auditor_id: auditor_id.to_string(),
            tags,
            timestamp: now(),
            manual_override: false,
        };
        self.decide(item_id, decision, expected_version)
    }

    /// Resolves an escalated item with tags chosen by `auditor_id`.
    pub fn manual_override(
        &mut self,
        item_id: u64,
        auditor_id: &str,
        tags: Vec<NerLabel>,
        expected_version: Option<u64>,
    ) -> Result<AuditItem, AuditError> {
        let decision = Decision {
            auditor_id: auditor_id.to_string(),
            tags,
            timestamp: now(),
            manual_override: true,
        };
        self.decide(item_id, decision, expected_version)
    }

    pub fn add_report(&mut self, report: IterationReport) -> Result<(), AuditError> {
        self.commit(Record::Report { report })
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

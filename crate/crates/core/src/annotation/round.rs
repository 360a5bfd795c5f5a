//! In-memory state of one annotation round, driven by journal events.

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::assign::AnnotationTask;
use super::kappa::{kappa_from_pairs, weighted_mean, KappaResult};
use super::AnnotationError;
use crate::curation::{Label, LabeledPair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Opened { round: u32, tasks: Vec<AnnotationTask> },
    Label { pair_id: String, annotator_id: String, label: Label, timestamp: DateTime<Utc> },
    Adjudicated { pair_id: String, label: Label, note: Option<String>, timestamp: DateTime<Utc> },
    Closed { timestamp: DateTime<Utc> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub label: Label,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub pair_id: String,
    pub annotator_id: String,
    pub previous: Label,
    pub label: Label,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub label: Label,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FinalLabel {
    pub label: Label,
    pub adjudicated: bool,
}

/// Final labels for doubly-labeled pairs. Agreements finalize on their own;
/// each disagreement needs a resolution equal to one of its labels, or any
/// label with a note.
pub fn adjudicate(pairs: &[(String, Label, Label)], resolutions: &BTreeMap<String, Resolution>) -> Result<BTreeMap<String, FinalLabel>, AnnotationError> {
    let mut out = BTreeMap::new();
    let mut unresolved = Vec::new();
    for (id, a, b) in pairs {
        if a == b {
            out.insert(id.clone(), FinalLabel { label: *a, adjudicated: false });
            continue;
        }
        match resolutions.get(id) {
            Some(r) if r.label == *a || r.label == *b || r.note.as_deref().is_some_and(|n| !n.trim().is_empty()) => {
                out.insert(id.clone(), FinalLabel { label: r.label, adjudicated: true });
            }
            Some(_) => return Err(AnnotationError::Validation(format!("resolution for {id} matches neither label and has no note"))),
            None => unresolved.push(id.clone()),
        }
    }
    if unresolved.is_empty() {
        Ok(out)
    } else {
        Err(AnnotationError::IncompleteAdjudication(unresolved))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnotatorProgress {
    pub assigned: usize,
    pub labeled: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Progress {
    pub round: u32,
    pub total_pairs: usize,
    pub fully_labeled: usize,
    pub disagreements: usize,
    pub unresolved: usize,
    pub closable: bool,
    pub closed: bool,
    pub annotators: BTreeMap<String, AnnotatorProgress>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SetKappa {
    pub set_index: u8,
    pub annotators: [String; 2],
    pub result: Option<KappaResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundKappa {
    pub sets: Vec<SetKappa>,
    /// Mean of per-set kappas weighted by items.
    pub weighted_mean: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Disagreement {
    pub pair_id: String,
    pub lemma: String,
    pub concept_id: String,
    pub concept_name: String,
    pub labels: BTreeMap<String, Label>,
    pub resolution: Option<Label>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundState {
    pub round: u32,
    pub tasks: Vec<AnnotationTask>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    pub labels: BTreeMap<String, BTreeMap<String, LabelRecord>>,
    pub audit: Vec<AuditRow>,
    pub resolutions: BTreeMap<String, Resolution>,
    pub closed: bool,
}

impl RoundState {
    pub fn new(round: u32, tasks: Vec<AnnotationTask>) -> Self {
        let mut s = Self {
            round,
            tasks,
            index: HashMap::new(),
            labels: BTreeMap::new(),
            audit: Vec::new(),
            resolutions: BTreeMap::new(),
            closed: false,
        };
        s.reindex();
        s
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self.tasks.iter().enumerate().map(|(i, t)| (t.pair_id.clone(), i)).collect();
    }

    pub fn task(&self, pair_id: &str) -> Option<&AnnotationTask> {
        self.index.get(pair_id).map(|&i| &self.tasks[i])
    }

    fn ensure_open(&self) -> Result<(), AnnotationError> {
        if self.closed {
            Err(AnnotationError::Closed(self.round))
        } else {
            Ok(())
        }
    }

    /// Checks a submission and turns it into an event.
    pub fn label_event(&self, pair_id: &str, annotator_id: &str, label: u8, timestamp: DateTime<Utc>) -> Result<Event, AnnotationError> {
        self.ensure_open()?;
        let label = Label::try_from(label).map_err(AnnotationError::Validation)?;
        let task = self.task(pair_id).ok_or_else(|| AnnotationError::NotFound(format!("pair {pair_id}")))?;
        if !task.assigned_annotators.iter().any(|a| a == annotator_id) {
            return Err(AnnotationError::Unauthorized(format!("{annotator_id} is not assigned to pair {pair_id}")));
        }
        Ok(Event::Label {
            pair_id: pair_id.to_string(),
            annotator_id: annotator_id.to_string(),
            label,
            timestamp,
        })
    }

    pub fn adjudication_event(&self, pair_id: &str, label: u8, note: Option<String>, timestamp: DateTime<Utc>) -> Result<Event, AnnotationError> {
        self.ensure_open()?;
        let label = Label::try_from(label).map_err(AnnotationError::Validation)?;
        self.task(pair_id).ok_or_else(|| AnnotationError::NotFound(format!("pair {pair_id}")))?;
        let given: Vec<Label> = self.labels.get(pair_id).map(|m| m.values().map(|r| r.label).collect()).unwrap_or_default();
        if given.len() < 2 || given[0] == given[1] {
            return Err(AnnotationError::Validation(format!("pair {pair_id} is not a disagreement")));
        }
        let note = note.filter(|n| !n.trim().is_empty());
        if !given.contains(&label) && note.is_none() {
            return Err(AnnotationError::Validation("an override needs a note".into()));
        }
        Ok(Event::Adjudicated {
            pair_id: pair_id.to_string(),
            label,
            note,
            timestamp,
        })
    }

    pub fn close_event(&self, timestamp: DateTime<Utc>) -> Result<Event, AnnotationError> {
        self.ensure_open()?;
        self.final_labels()?;
        Ok(Event::Closed { timestamp })
    }

    /// Applies a validated event. Returns the previous label for relabels.
    pub fn apply(&mut self, event: &Event) -> Option<Label> {
        match event {
            Event::Opened { round, tasks } => {
                *self = Self::new(*round, tasks.clone());
                None
            }
            Event::Label {
                pair_id,
                annotator_id,
                label,
                timestamp,
            } => {
                let slot = self.labels.entry(pair_id.clone()).or_default();
                let prev = slot.insert(
                    annotator_id.clone(),
                    LabelRecord {
                        label: *label,
                        timestamp: *timestamp,
                    },
                );
                let prev = prev.map(|p| p.label);
                if let Some(previous) = prev {
                    self.audit.push(AuditRow {
                        pair_id: pair_id.clone(),
                        annotator_id: annotator_id.clone(),
                        previous,
                        label: *label,
                        timestamp: *timestamp,
                    });
                    // a changed label reopens any adjudication on the pair
                    self.resolutions.remove(pair_id);
                }
                prev
            }
            Event::Adjudicated { pair_id, label, note, .. } => {
                self.resolutions.insert(pair_id.clone(), Resolution { label: *label, note: note.clone() });
                None
            }
            Event::Closed { .. } => {
                self.closed = true;
                None
            }
        }
    }

    /// First task in assignment order this annotator has not labeled.
    pub fn next_task(&self, annotator_id: &str) -> Option<&AnnotationTask> {
        self.tasks.iter().find(|t| {
            t.assigned_annotators.iter().any(|a| a == annotator_id) && !self.labels.get(&t.pair_id).is_some_and(|m| m.contains_key(annotator_id))
        })
    }

    fn label_of(&self, pair_id: &str, annotator: &str) -> Option<Label> {
        self.labels.get(pair_id).and_then(|m| m.get(annotator)).map(|r| r.label)
    }

    fn doubly_labeled(&self) -> Vec<(String, Label, Label)> {
        self.tasks
            .iter()
            .filter_map(|t| {
                let a = self.label_of(&t.pair_id, &t.assigned_annotators[0])?;
                let b = self.label_of(&t.pair_id, &t.assigned_annotators[1])?;
                Some((t.pair_id.clone(), a, b))
            })
            .collect()
    }

    pub fn disagreements(&self) -> Vec<Disagreement> {
        self.doubly_labeled()
            .into_iter()
            .filter(|(_, a, b)| a != b)
            .map(|(id, _, _)| {
                let t = self.task(&id).expect("indexed");
                Disagreement {
                    pair_id: id.clone(),
                    lemma: t.lemma.clone(),
                    concept_id: t.concept_id.clone(),
                    concept_name: t.concept_name.clone(),
                    labels: t
                        .assigned_annotators
                        .iter()
                        .filter_map(|a| self.label_of(&id, a).map(|l| (a.clone(), l)))
                        .collect(),
                    resolution: self.resolutions.get(&id).map(|r| r.label),
                }
            })
            .collect()
    }

    pub fn progress(&self) -> Progress {
        let mut annotators: BTreeMap<String, AnnotatorProgress> = BTreeMap::new();
        for t in &self.tasks {
            for a in &t.assigned_annotators {
                let p = annotators.entry(a.clone()).or_insert(AnnotatorProgress { assigned: 0, labeled: 0 });
                p.assigned += 1;
                p.labeled += usize::from(self.label_of(&t.pair_id, a).is_some());
            }
        }
        let doubly = self.doubly_labeled();
        let dis = self.disagreements();
        let unresolved = dis.iter().filter(|d| d.resolution.is_none()).count();
        Progress {
            round: self.round,
            total_pairs: self.tasks.len(),
            fully_labeled: doubly.len(),
            disagreements: dis.len(),
            unresolved,
            closable: !self.closed && doubly.len() == self.tasks.len() && unresolved == 0,
            closed: self.closed,
            annotators,
        }
    }

    pub fn kappa(&self) -> RoundKappa {
        let mut sets = Vec::new();
        for set in 0..3u8 {
            let tasks: Vec<&AnnotationTask> = self.tasks.iter().filter(|t| t.set_index == set).collect();
            let Some(first) = tasks.first() else { continue };
            let pairs: Vec<(Label, Label)> = tasks
                .iter()
                .filter_map(|t| Some((self.label_of(&t.pair_id, &t.assigned_annotators[0])?, self.label_of(&t.pair_id, &t.assigned_annotators[1])?)))
                .collect();
            sets.push(SetKappa {
                set_index: set,
                annotators: first.assigned_annotators.clone(),
                result: kappa_from_pairs(&pairs).ok(),
            });
        }
        let results: Vec<KappaResult> = sets.iter().filter_map(|s| s.result).collect();
        RoundKappa {
            weighted_mean: weighted_mean(&results),
            sets,
        }
    }

    /// One final label per pair, or the reason the round cannot close.
    pub fn final_labels(&self) -> Result<Vec<LabeledPair>, AnnotationError> {
        let doubly = self.doubly_labeled();
        if doubly.len() != self.tasks.len() {
            let done: std::collections::HashSet<&str> = doubly.iter().map(|d| d.0.as_str()).collect();
            let missing: Vec<String> = self.tasks.iter().filter(|t| !done.contains(t.pair_id.as_str())).map(|t| t.pair_id.clone()).collect();
            return Err(AnnotationError::Unlabeled(missing));
        }
        let finals = adjudicate(&doubly, &self.resolutions)?;
        let mut out: Vec<LabeledPair> = self
            .tasks
            .iter()
            .map(|t| LabeledPair::new(&t.lemma, &t.concept_id, finals[&t.pair_id].label))
            .collect();
        out.sort();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::assign::{split_and_assign, AnnotationPair};

    fn ts() -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000, 0).unwrap()
    }

    fn l(v: u8) -> Label {
        Label::try_from(v).unwrap()
    }

    fn state() -> RoundState {
        let pairs: Vec<AnnotationPair> = (0..9).map(|i| AnnotationPair::new(&format!("l{i}"), "C1", "Cough")).collect();
        let ann = vec!["a".to_string(), "b".into(), "c".into()];
        RoundState::new(1, split_and_assign(&pairs, &ann, 5).unwrap())
    }

    fn label_everything(s: &mut RoundState, f: impl Fn(&AnnotationTask, &str) -> u8) {
        for t in s.tasks.clone() {
            for a in &t.assigned_annotators {
                let e = s.label_event(&t.pair_id, a, f(&t, a), ts()).unwrap();
                s.apply(&e);
            }
        }
    }

    #[test]
    fn adjudication_rules() {
        let pairs = vec![("p1".to_string(), l(1), l(1)), ("p2".to_string(), l(0), l(1))];
        let mut res = BTreeMap::new();
        assert!(matches!(adjudicate(&pairs, &res), Err(AnnotationError::IncompleteAdjudication(ids)) if ids == vec!["p2"]));
        res.insert("p2".into(), Resolution { label: l(1), note: None });
        let f = adjudicate(&pairs, &res).unwrap();
        assert_eq!(f["p1"], FinalLabel { label: l(1), adjudicated: false });
        assert_eq!(f["p2"], FinalLabel { label: l(1), adjudicated: true });
        res.insert("p2".into(), Resolution { label: l(2), note: None });
        assert!(adjudicate(&pairs, &res).is_err());
        res.insert("p2".into(), Resolution { label: l(2), note: Some("discussed".into()) });
        assert_eq!(adjudicate(&pairs, &res).unwrap()["p2"].label, l(2));
    }

    #[test]
    fn submission_checks() {
        let s = state();
        let t = &s.tasks[0];
        let outsider = ["a", "b", "c"].into_iter().find(|a| !t.assigned_annotators.iter().any(|x| x == a)).unwrap();
        assert!(matches!(s.label_event(&t.pair_id, outsider, 1, ts()), Err(AnnotationError::Unauthorized(_))));
        assert!(matches!(s.label_event("nope", "a", 1, ts()), Err(AnnotationError::NotFound(_))));
        assert!(matches!(s.label_event(&t.pair_id, &t.assigned_annotators[0], 5, ts()), Err(AnnotationError::Validation(_))));
    }

    #[test]
    fn relabel_is_audited_and_progress_counts() {
        let mut s = state();
        let t = s.tasks[0].clone();
        let a = t.assigned_annotators[0].clone();
        s.apply(&s.label_event(&t.pair_id, &a, 1, ts()).unwrap());
        assert_eq!(s.progress().annotators[&a].labeled, 1);
        let prev = s.apply(&s.label_event(&t.pair_id, &a, 0, ts()).unwrap());
        assert_eq!(prev, Some(l(1)));
        assert_eq!(s.audit.len(), 1);
        assert_eq!(s.progress().annotators[&a].labeled, 1);
        assert_ne!(s.next_task(&a).unwrap().pair_id, t.pair_id);
    }

    #[test]
    fn close_needs_resolution() {
        let mut s = state();
        let planted = s.tasks[4].pair_id.clone();
        label_everything(&mut s, |t, a| if t.pair_id == planted && a == t.assigned_annotators[1] { 0 } else { 1 });
        assert_eq!(s.disagreements().len(), 1);
        assert!(!s.progress().closable);
        assert!(matches!(s.close_event(ts()), Err(AnnotationError::IncompleteAdjudication(_))));
        s.apply(&s.adjudication_event(&planted, 1, None, ts()).unwrap());
        assert!(s.progress().closable);
        let finals = s.final_labels().unwrap();
        assert_eq!(finals.len(), 9);
        assert!(finals.iter().all(|p| p.label == l(1)));
        let e = s.close_event(ts()).unwrap();
        s.apply(&e);
        assert!(matches!(s.label_event(&planted, "a", 1, ts()), Err(AnnotationError::Closed(1))));
    }

    #[test]
    fn kappa_per_set() {
        let mut s = state();
        label_everything(&mut s, |t, _| if t.lemma.ends_with(['1', '2', '3']) { 0 } else { 1 });
        let k = s.kappa();
        assert_eq!(k.sets.len(), 3);
        assert_eq!(k.weighted_mean, Some(1.0));
    }
}

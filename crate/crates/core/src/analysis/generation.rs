//! Generation accuracy per gold position.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::corpus::Task;
use crate::tensor_store::{GenerationRecord, Manifest};
use crate::text::{contains_phrase, contains_token};

/// KV (and synthetic) outputs must contain the full value as one token;
/// MDQA outputs must contain any alias as a normalized substring.
pub fn is_correct(record: &GenerationRecord, task: Task) -> bool {
    match task {
        Task::Kv | Task::Synthetic => contains_token(&record.output_text, &record.answer),
        Task::Mdqa => record
            .answer_aliases
            .iter()
            .chain(std::iter::once(&record.answer))
            .any(|a| contains_phrase(&record.output_text, a)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionAccuracy {
    pub gold_position: u32,
    pub n: usize,
    pub correct: usize,
    /// `correct / n`, or 0 when no record hit this position.
    pub accuracy: f64,
}

/// Accuracy per scheduled position, in schedule order.
pub fn generation_accuracy(
    records: &[GenerationRecord],
    manifest: &Manifest,
) -> Result<Vec<PositionAccuracy>, AnalysisError> {
    let index: HashMap<&str, usize> = manifest
        .prompt_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let n_classes = manifest.schedule.len();
    let mut n = vec![0usize; n_classes];
    let mut correct = vec![0usize; n_classes];
    for r in records {
        let &i = index.get(r.prompt_id.as_str()).ok_or_else(|| {
            AnalysisError::Consistency(format!("generation for unknown prompt_id {}", r.prompt_id))
        })?;
        let class = manifest.gold_classes[i] as usize;
        n[class] += 1;
        correct[class] += is_correct(r, manifest.task) as usize;
    }
    Ok(manifest
        .schedule
        .positions
        .iter()
        .enumerate()
        .map(|(c, &p)| PositionAccuracy {
            gold_position: p,
            n: n[c],
            correct: correct[c],
            accuracy: if n[c] == 0 {
                0.0
            } else {
                correct[c] as f64 / n[c] as f64
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PositionSchedule;

    fn rec(id: &str, out: &str, answer: &str) -> GenerationRecord {
        GenerationRecord {
            prompt_id: id.into(),
            output_text: out.into(),
            answer: answer.into(),
            answer_aliases: vec![answer.into()],
            first_token_row: None,
            first_token_prob: None,
        }
    }

    const V: &str = "2a1d0ba0-cfe4-4df5-987a-6ee1be2c6ac0";

    #[test]
    fn kv_scoring() {
        assert!(is_correct(&rec("a", V, V), Task::Kv));
        assert!(is_correct(&rec("a", &format!(" \"{V}\"\n"), V), Task::Kv));
        assert!(!is_correct(&rec("a", "I cannot find the value.", V), Task::Kv));
        assert!(!is_correct(&rec("a", &V[..30], V), Task::Kv));
    }

    #[test]
    fn mdqa_scoring() {
        let r = rec(
            "a",
            "The first prize was awarded to Wilhelm Conrad Röntgen in 1901.",
            "Wilhelm Conrad Röntgen",
        );
        assert!(is_correct(&r, Task::Mdqa));
        let mut alt = rec("a", "It went to röntgen.", "Wilhelm Conrad Röntgen");
        assert!(!is_correct(&alt, Task::Mdqa));
        alt.answer_aliases.push("Röntgen".into());
        assert!(is_correct(&alt, Task::Mdqa));
    }

    #[test]
    fn per_position_rates() {
        let manifest = Manifest {
            model_name: "m".into(),
            layer_indexing_note: String::new(),
            prompt_ids: vec!["a".into(), "b".into(), "c".into()],
            gold_classes: vec![0, 1, 1],
            gold_positions: vec![1, 2, 2],
            task: Task::Kv,
            schedule: PositionSchedule::from_positions(2, vec![1, 2]).unwrap(),
            generations: None,
            extractor_version: String::new(),
            target_token_rows: None,
            skipped: vec![],
        };
        let recs = vec![rec("a", V, V), rec("b", V, V), rec("c", "nope", V)];
        let acc = generation_accuracy(&recs, &manifest).unwrap();
        assert_eq!(acc[0].accuracy, 1.0);
        assert_eq!(acc[1].accuracy, 0.5);
        assert_eq!(acc[1].n, 2);
        let err = generation_accuracy(&[rec("zzz", V, V)], &manifest);
        assert!(matches!(err, Err(AnalysisError::Consistency(_))));
    }
}

//! A/B comparison of selection methods: item construction, choice files,
//! win-rate tallies with exact binomial significance, and the report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::corpus::synth::{ground_truth_increase, StyleLexicon};
use crate::corpus::PersonalityProfile;
use crate::error::{Error, Result};
use crate::simulator::{MethodKind, Party, SimulatedDialogue};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// One simulated dialogue a participant may see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueRef {
    pub method: MethodKind,
    /// Where the dialogue lives, e.g. `simulation.json#1`.
    pub dialogue: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    First,
    Second,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbItem {
    pub item_id: usize,
    pub participant_id: String,
    /// Shown first.
    pub first: DialogueRef,
    pub second: DialogueRef,
    /// True when the presentation order differs from the canonical
    /// (method-order) one.
    pub swapped: bool,
    pub choice: Choice,
}

impl AbItem {
    /// Winning and losing methods, if a choice was recorded.
    pub fn outcome(&self) -> Option<(MethodKind, MethodKind)> {
        match self.choice {
            Choice::First => Some((self.first.method, self.second.method)),
            Choice::Second => Some((self.second.method, self.first.method)),
            Choice::Absent => None,
        }
    }
}

/// The dialogues simulated for one participant, one per method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantDialogues {
    pub participant_id: String,
    pub dialogues: Vec<DialogueRef>,
}

/// Every unordered method pair per participant, in seeded random order with
/// a seeded presentation order inside each pair.
pub fn build_ab_items(participants: &[ParticipantDialogues], seed: u64) -> Result<Vec<AbItem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for p in participants {
        if !seen_ids.insert(p.participant_id.as_str()) {
            return Err(Error::validation(format!("duplicate participant {:?}", p.participant_id)));
        }
        let methods: BTreeSet<MethodKind> = p.dialogues.iter().map(|d| d.method).collect();
        if methods.len() != p.dialogues.len() || methods.len() < 2 {
            return Err(Error::validation(format!(
                "participant {:?} needs one dialogue per method, at least two methods",
                p.participant_id
            )));
        }
        let mut pairs = Vec::new();
        for i in 0..p.dialogues.len() {
            for j in i + 1..p.dialogues.len() {
                pairs.push((i, j));
            }
        }
        pairs.shuffle(&mut rng);
        for (i, j) in pairs {
            let swapped = rng.random::<bool>();
            let (a, b) = if swapped { (j, i) } else { (i, j) };
            items.push(AbItem {
                item_id: items.len(),
                participant_id: p.participant_id.clone(),
                first: p.dialogues[a].clone(),
                second: p.dialogues[b].clone(),
                swapped,
                choice: Choice::Absent,
            });
        }
    }
    Ok(items)
}

/// Two-sided exact binomial (sign) test against p = 0.5:
/// `2 · min(P(X ≤ wins), P(X ≥ wins))`, capped at 1.
pub fn binomial_significance(wins: u64, n: u64) -> Result<f64> {
    if wins > n {
        return Err(Error::validation(format!("wins {wins} exceed comparisons {n}")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let pmf = |k: u64| (ln_binomial(n, k) - ln_half_n).exp();
    let lower: f64 = (0..=wins).map(pmf).sum();
    let upper: f64 = (wins..=n).map(pmf).sum();
    Ok((2.0 * lower.min(upper)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinCell {
    pub wins: u64,
    pub n: u64,
    pub rate: f64,
    pub p_value: f64,
}

/// `cells[i][j]`: how often `methods[i]` beat `methods[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinMatrix {
    pub methods: Vec<MethodKind>,
    pub cells: Vec<Vec<Option<WinCell>>>,
}

impl WinMatrix {
    pub fn cell(&self, row: MethodKind, col: MethodKind) -> Option<&WinCell> {
        let i = self.methods.iter().position(|&m| m == row)?;
        let j = self.methods.iter().position(|&m| m == col)?;
        self.cells[i][j].as_ref()
    }
}

/// Win rates over `methods` (table order). Every item must carry a choice.
pub fn tally(items: &[AbItem], methods: &[MethodKind]) -> Result<WinMatrix> {
    let mut wins: BTreeMap<(MethodKind, MethodKind), u64> = BTreeMap::new();
    for item in items {
        let (w, l) = item
            .outcome()
            .ok_or_else(|| Error::validation(format!("item {} has no recorded choice", item.item_id)))?;
        if w == l {
            return Err(Error::validation(format!("item {} compares {w} with itself", item.item_id)));
        }
        for m in [w, l] {
            if !methods.contains(&m) {
                return Err(Error::validation(format!("item {} uses method {m} outside the table", item.item_id)));
            }
        }
        *wins.entry((w, l)).or_default() += 1;
    }
    let mut cells = vec![vec![None; methods.len()]; methods.len()];
    for (i, &a) in methods.iter().enumerate() {
        for (j, &b) in methods.iter().enumerate() {
            if i == j {
                continue;
            }
            let w = wins.get(&(a, b)).copied().unwrap_or(0);
            let n = w + wins.get(&(b, a)).copied().unwrap_or(0);
            if n > 0 {
                cells[i][j] = Some(WinCell {
                    wins: w,
                    n,
                    rate: w as f64 / n as f64,
                    p_value: binomial_significance(w, n)?,
                });
            }
        }
    }
    Ok(WinMatrix { methods: methods.to_vec(), cells })
}

/// Table of winning rates of each row method over each column method. A
/// star marks the winning side of a significant comparison.
pub fn render_ab_report(matrix: &WinMatrix) -> String {
    let names: Vec<&str> = matrix.methods.iter().map(|m| m.display_name()).collect();
    let mut out = format!("| | {} |\n|---|{}\n", names.join(" | "), ":---:|".repeat(names.len()));
    for (i, row) in matrix.cells.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, c)| match c {
                _ if i == j => "--".to_string(),
                None => "n/a".to_string(),
                Some(c) => {
                    let star = if c.p_value < SIGNIFICANCE_LEVEL && c.rate > 0.5 { "*" } else { "" };
                    format!("{:.0}%{star}", c.rate * 100.0)
                }
            })
            .collect();
        let _ = writeln!(out, "| {} | {} |", names[i], cells.join(" | "));
    }
    let _ = writeln!(
        out,
        "\nResults of the A/B test. Each value shows the winning rate of the leftmost listed methods. \
         * indicates a significant difference (exact binomial test, p<{SIGNIFICANCE_LEVEL})."
    );
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceRow {
    pub participant_id: String,
    pub item_id: usize,
    pub choice: Choice,
}

pub fn write_choices(path: &Path, items: &[AbItem]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for item in items {
        w.serialize(ChoiceRow {
            participant_id: item.participant_id.clone(),
            item_id: item.item_id,
            choice: item.choice,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_choices(path: &Path) -> Result<Vec<ChoiceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

/// Copies recorded choices onto their items. Participant ids must agree;
/// items without a row keep their current choice.
pub fn apply_choices(items: &mut [AbItem], rows: &[ChoiceRow]) -> Result<()> {
    for row in rows {
        let item = items
            .get_mut(row.item_id)
            .filter(|i| i.item_id == row.item_id)
            .ok_or_else(|| Error::validation(format!("choice for unknown item {}", row.item_id)))?;
        if item.participant_id != row.participant_id {
            return Err(Error::validation(format!(
                "item {} belongs to {:?}, not {:?}",
                row.item_id, item.participant_id, row.participant_id
            )));
        }
        item.choice = row.choice;
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        Error::validation(format!("choices file: {e}"))
    }
}

/// Utterances after the common prefix, spoken by `speaker`, whose style the
/// listener's hidden preferences reward.
pub fn ground_truth_increases(
    dialogue: &SimulatedDialogue,
    speaker: Party,
    listener: &PersonalityProfile,
    lexicon: &StyleLexicon,
) -> usize {
    dialogue.utterances[dialogue.common_turns.min(dialogue.utterances.len())..]
        .iter()
        .filter(|t| t.speaker == speaker)
        .filter(|t| lexicon.style_of(&t.text).is_some_and(|s| ground_truth_increase(s, listener)))
        .count()
}

/// Scripted stand-in for a participant: picks the dialogue with more
/// ground-truth increases of X's impression of Y, a seeded coin on ties.
pub fn scripted_choice(first: usize, second: usize, rng: &mut impl Rng) -> Choice {
    match first.cmp(&second) {
        std::cmp::Ordering::Greater => Choice::First,
        std::cmp::Ordering::Less => Choice::Second,
        std::cmp::Ordering::Equal => {
            if rng.random::<bool>() {
                Choice::First
            } else {
                Choice::Second
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn participant(id: &str) -> ParticipantDialogues {
        ParticipantDialogues {
            participant_id: id.to_string(),
            dialogues: MethodKind::ALL
                .iter()
                .enumerate()
                .map(|(i, &method)| DialogueRef { method, dialogue: format!("{id}#{i}") })
                .collect(),
        }
    }

    #[test]
    fn three_items_per_participant() {
        let ps: Vec<_> = (0..20).map(|i| participant(&format!("p{i}"))).collect();
        let items = build_ab_items(&ps, 4).unwrap();
        assert_eq!(items.len(), 60);
        assert_eq!(items, build_ab_items(&ps, 4).unwrap());
        assert!(items.iter().all(|i| i.first.method != i.second.method));
        assert!(items.iter().enumerate().all(|(k, i)| i.item_id == k));
        assert!(build_ab_items(&[participant("a"), participant("a")], 0).is_err());
    }

    #[test]
    fn binomial_values() {
        let p = binomial_significance(15, 20).unwrap();
        assert!((p - 2.0 * 21700.0 / 1048576.0).abs() < 1e-12);
        assert_eq!(binomial_significance(10, 20).unwrap(), 1.0);
        assert_eq!(binomial_significance(1, 1).unwrap(), 1.0);
        assert_eq!(binomial_significance(0, 0).unwrap(), 1.0);
        assert!(binomial_significance(3, 2).is_err());
        let ps: Vec<f64> = (10..=20).map(|w| binomial_significance(w, 20).unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[1] < w[0]));
    }

    fn item(id: usize, a: MethodKind, b: MethodKind, choice: Choice) -> AbItem {
        AbItem {
            item_id: id,
            participant_id: format!("p{id}"),
            first: DialogueRef { method: a, dialogue: String::new() },
            second: DialogueRef { method: b, dialogue: String::new() },
            swapped: false,
            choice,
        }
    }

    #[test]
    fn paper_style_matrix() {
        use MethodKind::*;
        let mut items = Vec::new();
        let mut add = |a, b, wins: usize, n: usize| {
            for k in 0..n {
                let c = if k < wins { Choice::First } else { Choice::Second };
                items.push(item(items.len(), a, b, c));
            }
        };
        add(VotePd, VoteD, 15, 20);
        add(Baseline, VotePd, 5, 20);
        add(VoteD, Baseline, 13, 20);
        let m = tally(&items, &[VotePd, VoteD, Baseline]).unwrap();
        assert_eq!(m.cell(VotePd, VoteD).unwrap().rate, 0.75);
        assert_eq!(m.cell(VoteD, Baseline).unwrap().rate, 0.65);
        for a in MethodKind::ALL {
            for b in MethodKind::ALL {
                if a != b {
                    let s = m.cell(a, b).unwrap().rate + m.cell(b, a).unwrap().rate;
                    assert!((s - 1.0).abs() < 1e-15);
                }
            }
        }
        let report = render_ab_report(&m);
        assert!(report.contains("| P+D | -- | 75%* | 75%* |"), "{report}");
        assert!(report.contains("| D | 25% | -- | 65% |"));
        assert!(report.contains("| Baseline | 25% | 35% | -- |"));
    }

    #[test]
    fn tally_requires_choices() {
        let items = [item(0, MethodKind::VotePd, MethodKind::VoteD, Choice::Absent)];
        assert!(tally(&items, &MethodKind::ALL).unwrap_err().is_validation());
    }

    #[test]
    fn choices_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("choices.csv");
        let ps = [participant("a")];
        let mut items = build_ab_items(&ps, 0).unwrap();
        items[0].choice = Choice::First;
        items[1].choice = Choice::Second;
        write_choices(&path, &items).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("participant_id,item_id,choice\na,0,first\n"));
        let rows = read_choices(&path).unwrap();
        let mut fresh = build_ab_items(&ps, 0).unwrap();
        apply_choices(&mut fresh, &rows).unwrap();
        assert_eq!(fresh, items);
        let bad = [ChoiceRow { participant_id: "b".into(), item_id: 0, choice: Choice::First }];
        assert!(apply_choices(&mut fresh, &bad).is_err());
    }
}

//! Speaker personality: 25 profile items and 32 psychological scales.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical profile item names, in rendering order.
pub const PROFILE_ITEM_NAMES: [&str; 25] = [
    "Age",
    "Final Education",
    "Department",
    "Residence",
    "Hometown",
    "Occupation",
    "Holiday",
    "Annual Income",
    "Family",
    "Living Situation",
    "Marital History",
    "Smoking",
    "Alcohol",
    "About Marriage",
    "Personality",
    "Recent Fad",
    "Favorite Type",
    "Special Skills",
    "Favorite Food",
    "Favorite Movie",
    "Favorite Music",
    "How to Spend Holidays",
    "Places to Go on a Date",
    "Topics to Talk About",
    "Self-Introduction",
];

/// Canonical psychological scale names, in rendering order.
pub const SCALE_NAMES: [&str; 32] = [
    "Rosenberg’s Self Esteem Scale (RSES)",
    "Self-Consciousness Scale",
    "Immersion Scale",
    "Big Five Scale",
    "Short Version of Egalitarian Sex Role Attitude Scale",
    "Gender Identity Scale",
    "Trait Shyness Scale",
    "Self-Monitoring Scale",
    "Clothing Interest Questionnaire",
    "Romantic love attitude Scale",
    "Lee's Love Type scale 2nd version (LETS-2)",
    "Interpersonal Trust Scale",
    "Family Functioning Scale (FACES III)",
    "Friendship Scale",
    "Kikuchi's Scale of Social Skills (KiSS-18)",
    "Value Orientation Scale",
    "Sense of Leisure Scale",
    "Purpose in Life Scale",
    "Way of Life Scale",
    "Privacy Orientation Scale",
    "Multidimensional Empathy Scale",
    "Goal Preference Scale in Friendship Situations",
    "Affinity Motivation Scale",
    "Loneliness Scale",
    "Divorce Feeling Scale",
    "Friendship Measurement Scale",
    "Love Image Scale",
    "Self-concealment Scale",
    "Communication Skills Scale ENDCOREs",
    "Daily Life Skills Scale",
    "Subjective Well-Being Inventory (SUBI)",
    "Situational Interpersonal Anxiety Scale",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileItem {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleScores {
    pub name: String,
    pub scores: Vec<f64>,
}

/// One speaker's personality as annotated in the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalityProfile {
    pub speaker_id: String,
    pub profile_items: Vec<ProfileItem>,
    pub scales: Vec<ScaleScores>,
}

impl PersonalityProfile {
    /// A profile carrying every canonical name with empty values.
    pub fn blank(speaker_id: impl Into<String>) -> Self {
        Self {
            speaker_id: speaker_id.into(),
            profile_items: PROFILE_ITEM_NAMES
                .iter()
                .map(|n| ProfileItem {
                    name: (*n).to_string(),
                    value: String::new(),
                })
                .collect(),
            scales: SCALE_NAMES
                .iter()
                .map(|n| ScaleScores {
                    name: (*n).to_string(),
                    scores: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.profile_items.len() != PROFILE_ITEM_NAMES.len() {
            return Err(Error::validation(format!(
                "profile {}: expected {} profile items, found {}",
                self.speaker_id,
                PROFILE_ITEM_NAMES.len(),
                self.profile_items.len()
            )));
        }
        for (item, canonical) in self.profile_items.iter().zip(PROFILE_ITEM_NAMES) {
            if item.name != canonical {
                return Err(Error::validation(format!(
                    "profile {}: item {:?} out of place, expected {:?}",
                    self.speaker_id, item.name, canonical
                )));
            }
        }
        if self.scales.len() != SCALE_NAMES.len() {
            return Err(Error::validation(format!(
                "profile {}: expected {} scales, found {}",
                self.speaker_id,
                SCALE_NAMES.len(),
                self.scales.len()
            )));
        }
        for (scale, canonical) in self.scales.iter().zip(SCALE_NAMES) {
            if scale.name != canonical {
                return Err(Error::validation(format!(
                    "profile {}: scale {:?} out of place, expected {:?}",
                    self.speaker_id, scale.name, canonical
                )));
            }
            if let Some(bad) = scale.scores.iter().find(|s| !s.is_finite()) {
                return Err(Error::validation(format!(
                    "profile {}: scale {:?} has non-finite score {bad}",
                    self.speaker_id, scale.name
                )));
            }
        }
        Ok(())
    }

    pub fn item(&self, name: &str) -> Option<&str> {
        self.profile_items
            .iter()
            .find(|i| i.name == name)
            .map(|i| i.value.as_str())
    }

    pub fn scale(&self, name: &str) -> Option<&[f64]> {
        self.scales
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.scores.as_slice())
    }

    /// Sets a canonical item; unknown names are a validation error.
    pub fn set_item(&mut self, name: &str, value: impl Into<String>) -> Result<()> {
        let slot = self
            .profile_items
            .iter_mut()
            .find(|i| i.name == name)
            .ok_or_else(|| Error::validation(format!("unknown profile item {name:?}")))?;
        slot.value = value.into();
        Ok(())
    }

    pub fn set_scale(&mut self, name: &str, scores: Vec<f64>) -> Result<()> {
        let slot = self
            .scales
            .iter_mut()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::validation(format!("unknown scale {name:?}")))?;
        slot.scores = scores;
        Ok(())
    }

    /// Model-facing text: one `name: value` line per non-empty entry, profile
    /// items first, then scales, both in canonical order. Scale scores are
    /// printed with one decimal.
    pub fn render_text(&self) -> String {
        let items = self
            .profile_items
            .iter()
            .filter(|i| !i.value.trim().is_empty())
            .map(|i| format!("{}: {}", i.name, i.value.trim()));
        let scales = self.scales.iter().filter(|s| !s.scores.is_empty()).map(|s| {
            let scores: Vec<String> = s.scores.iter().map(|v| format!("{v:.1}")).collect();
            format!("{}: {}", s.name, scores.join(" "))
        });
        items.chain(scales).collect::<Vec<_>>().join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_names_are_unique() {
        let mut items = PROFILE_ITEM_NAMES.to_vec();
        items.sort();
        items.dedup();
        assert_eq!(items.len(), 25);
        let mut scales = SCALE_NAMES.to_vec();
        scales.sort();
        scales.dedup();
        assert_eq!(scales.len(), 32);
    }

    #[test]
    fn blank_profile_is_valid() {
        PersonalityProfile::blank("a").validate().unwrap();
    }

    #[test]
    fn rejects_missing_and_reordered_entries() {
        let mut p = PersonalityProfile::blank("a");
        p.profile_items.pop();
        assert!(p.validate().is_err());

        let mut p = PersonalityProfile::blank("a");
        p.scales.swap(0, 1);
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_non_finite_scores() {
        let mut p = PersonalityProfile::blank("a");
        p.set_scale("Loneliness Scale", vec![1.0, f64::NAN]).unwrap();
        assert!(p.validate().is_err());
    }

    #[test]
    fn render_skips_empty_entries() {
        let mut p = PersonalityProfile::blank("a");
        assert_eq!(p.render_text(), "");
        p.set_item("Age", "27").unwrap();
        p.set_scale("Loneliness Scale", vec![0.25, 3.0]).unwrap();
        assert_eq!(p.render_text(), "Age: 27\nLoneliness Scale: 0.2 3.0");
        assert!(p.set_item("Shoe Size", "9").is_err());
    }
}

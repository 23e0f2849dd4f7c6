//! Rule-based natural-language explanations of anomalous decisions.
//!
//! A [`RuleBase`] is an ordered list of rules. Each rule has a scope (one
//! salient point, or one channel), a conjunction of comparisons against
//! point or sequence features, and a sentence template with `{slot}`
//! markers. Reals are rendered with four significant digits, counts and
//! indices as integers.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureReport, PointEntry, SequenceFeatures, SEQUENCE_FEATURES};
use crate::influence::SalientPoint;
use crate::network::{FeatureThresholds, Prediction};
use crate::sanity::{Confidence, SanityResult};

const DEFAULT_RULES: &str = include_str!("../data/default_rules.json");

/// Percentile of normal-series feature values used as learned thresholds.
pub const THRESHOLD_PERCENTILE: f64 = 95.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Novice,
    #[default]
    Expert,
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "novice" => Ok(Level::Novice),
            "expert" => Ok(Level::Expert),
            other => Err(Error::config("level", format!("unknown level `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Point,
    Channel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Comparator {
    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
        }
    }
}

/// A literal number, or `"learned"` for the per-channel threshold stored
/// with the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Value(f64),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub feature: String,
    pub op: Comparator,
    pub threshold: Threshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub id: String,
    pub scope: Scope,
    pub when: Vec<Condition>,
    pub template: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleBase {
    /// Opening sentence; slots `label`, `probability`.
    pub summary: String,
    /// The single novice sentence; slots `channel`, `index`.
    pub novice: String,
    pub no_salient: String,
    pub high_confidence: String,
    pub low_confidence: String,
    /// Expert rules, evaluated in order.
    pub rules: Vec<Rule>,
}

const POINT_FEATURES: [&str; 10] = [
    "index",
    "value",
    "z_score",
    "abs_z_score",
    "is_global_max",
    "is_global_min",
    "is_local_peak",
    "is_local_valley",
    "is_highest_spike",
    "is_lowest_valley",
];

#[derive(Clone, Copy, PartialEq)]
enum SlotKind {
    Text,
    Count,
    Real,
}

fn slot_kind(scope: Option<Scope>, name: &str) -> Option<SlotKind> {
    use SlotKind::*;
    match (scope, name) {
        (_, "channel") => Some(Text),
        (Some(Scope::Point), "index") => Some(Count),
        (Some(Scope::Point), "scaled_influence") => Some(Real),
        (Some(Scope::Point), n) if POINT_FEATURES.contains(&n) => Some(Real),
        (Some(Scope::Channel), "num_peaks" | "block_size") => Some(Count),
        (Some(Scope::Channel), "r_sigma") => Some(Real),
        (Some(Scope::Channel), n) if SEQUENCE_FEATURES.contains(&n) => Some(Real),
        _ => None,
    }
}

/// Splits a template into literal text and slot names.
fn parse_template(template: &str) -> Result<Vec<(bool, &str)>> {
    let mut parts = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .map(|c| open + c)
            .ok_or_else(|| Error::Rule(format!("unterminated slot in `{template}`")))?;
        let name = &rest[open + 1..close];
        if name.is_empty() || name.contains('{') {
            return Err(Error::Rule(format!("malformed slot in `{template}`")));
        }
        parts.push((false, &rest[..open]));
        parts.push((true, name));
        rest = &rest[close + 1..];
    }
    if rest.contains('}') {
        return Err(Error::Rule(format!("stray `}}` in `{template}`")));
    }
    parts.push((false, rest));
    Ok(parts)
}

/// Renders a real with four significant digits.
pub fn format_sig4(v: f64) -> String {
    if v == 0.0 {
        return "0.000".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.3e}");
    let exp: i32 = sci.split_once('e').expect("exponent").1.parse().expect("exponent");
    if (-4..4).contains(&exp) {
        format!("{:.*}", (3 - exp) as usize, v)
    } else {
        sci
    }
}

enum SlotValue<'a> {
    Text(&'a str),
    Count(usize),
    Real(f64),
}

impl fmt::Display for SlotValue<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotValue::Text(s) => f.write_str(s),
            SlotValue::Count(n) => write!(f, "{n}"),
            SlotValue::Real(v) => f.write_str(&format_sig4(*v)),
        }
    }
}

fn fill<'a>(template: &str, lookup: impl Fn(&str) -> Option<SlotValue<'a>>) -> Result<String> {
    let mut out = String::with_capacity(template.len() + 32);
    for (is_slot, text) in parse_template(template)? {
        if is_slot {
            let v = lookup(text)
                .ok_or_else(|| Error::Rule(format!("no value for slot `{text}`")))?;
            out.push_str(&v.to_string());
        } else {
            out.push_str(text);
        }
    }
    Ok(out)
}

impl RuleBase {
    /// The built-in rule base.
    pub fn default_rules() -> Self {
        RuleBase::from_json(DEFAULT_RULES).expect("embedded rule base is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rb: RuleBase = serde_json::from_str(text).map_err(|e| Error::Rule(e.to_string()))?;
        rb.validate()?;
        Ok(rb)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule base serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let check_fixed = |name: &str, template: &str, allowed: &[&str]| -> Result<()> {
            for (is_slot, slot) in parse_template(template)? {
                if is_slot && !allowed.contains(&slot) {
                    return Err(Error::Rule(format!("`{name}` uses unknown slot `{slot}`")));
                }
            }
            Ok(())
        };
        check_fixed("summary", &self.summary, &["label", "probability"])?;
        check_fixed("novice", &self.novice, &["channel", "index"])?;
        check_fixed("no_salient", &self.no_salient, &[])?;
        check_fixed("high_confidence", &self.high_confidence, &[])?;
        check_fixed("low_confidence", &self.low_confidence, &[])?;

        let mut ids = std::collections::HashSet::new();
        for rule in &self.rules {
            if !ids.insert(rule.id.as_str()) {
                return Err(Error::Rule(format!("duplicate rule id `{}`", rule.id)));
            }
            if rule.when.is_empty() {
                return Err(Error::Rule(format!("rule `{}` has no conditions", rule.id)));
            }
            for c in &rule.when {
                let known = match rule.scope {
                    Scope::Point => {
                        POINT_FEATURES.contains(&c.feature.as_str()) || c.feature == "scaled_influence"
                    }
                    Scope::Channel => SEQUENCE_FEATURES.contains(&c.feature.as_str()),
                };
                if !known {
                    return Err(Error::Rule(format!(
                        "rule `{}`: unknown {:?} feature `{}`",
                        rule.id, rule.scope, c.feature
                    )));
                }
                match &c.threshold {
                    Threshold::Value(v) if !v.is_finite() => {
                        return Err(Error::Rule(format!("rule `{}`: non-finite threshold", rule.id)))
                    }
                    Threshold::Named(n) if n != "learned" || rule.scope != Scope::Channel => {
                        return Err(Error::Rule(format!(
                            "rule `{}`: threshold `{n}` is not allowed here",
                            rule.id
                        )))
                    }
                    _ => {}
                }
            }
            for (is_slot, slot) in parse_template(&rule.template)? {
                if is_slot && slot_kind(Some(rule.scope), slot).is_none() {
                    return Err(Error::Rule(format!(
                        "rule `{}` uses unknown slot `{slot}`",
                        rule.id
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Default for RuleBase {
    fn default() -> Self {
        RuleBase::default_rules()
    }
}

/// The evidence an explanation was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub salient_points: Vec<SalientPoint>,
    pub feature_report: FeatureReport,
    pub sanity: SanityResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStatement {
    pub channel: String,
    pub sentences: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub active: bool,
    pub level: Level,
    pub prediction: Prediction,
    pub summary: String,
    pub statements: Vec<ChannelStatement>,
    /// Sentences not tied to a channel (e.g. nothing was salient).
    pub notes: Vec<String>,
    pub confidence: Option<Confidence>,
    pub confidence_sentence: String,
    pub payload: Option<Payload>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderFormat {
    PlainText,
    Json,
}

impl Explanation {
    /// The explainer stays inactive for sequences classified as normal.
    pub fn inactive(prediction: Prediction, level: Level) -> Self {
        Explanation {
            active: false,
            level,
            prediction,
            summary: String::new(),
            statements: Vec::new(),
            notes: Vec::new(),
            confidence: None,
            confidence_sentence: String::new(),
            payload: None,
        }
    }

    /// Every sentence in reading order.
    pub fn sentences(&self) -> Vec<&str> {
        if !self.active {
            return Vec::new();
        }
        let mut out = vec![self.summary.as_str()];
        for st in &self.statements {
            out.extend(st.sentences.iter().map(String::as_str));
        }
        out.extend(self.notes.iter().map(String::as_str));
        out.push(&self.confidence_sentence);
        out
    }

    pub fn render(&self, format: RenderFormat) -> String {
        match (format, self.active) {
            (RenderFormat::PlainText, false) => String::new(),
            (RenderFormat::Json, false) => "{\"active\": false}".to_string(),
            (RenderFormat::PlainText, true) => {
                let mut out = String::new();
                out.push_str(&self.summary);
                out.push('\n');
                for st in &self.statements {
                    out.push_str(&st.channel);
                    out.push_str(": ");
                    out.push_str(&st.sentences.join(" "));
                    out.push('\n');
                }
                for note in &self.notes {
                    out.push_str(note);
                    out.push('\n');
                }
                out.push_str(&self.confidence_sentence);
                out.push('\n');
                out
            }
            (RenderFormat::Json, true) => {
                serde_json::to_string_pretty(self).expect("explanation serializes")
            }
        }
    }
}

fn point_lookup<'a>(entry: &'a PointEntry, name: &str) -> Option<SlotValue<'a>> {
    match name {
        "channel" => Some(SlotValue::Text(&entry.channel)),
        "index" => Some(SlotValue::Count(entry.features.index)),
        "scaled_influence" => Some(SlotValue::Real(entry.scaled_influence)),
        n => entry.features.get(n).map(SlotValue::Real),
    }
}

fn channel_lookup<'a>(
    channel: &'a str,
    features: &SequenceFeatures,
    config: &FeatureConfig,
    name: &str,
) -> Option<SlotValue<'a>> {
    match name {
        "channel" => Some(SlotValue::Text(channel)),
        "num_peaks" => Some(SlotValue::Count(features.num_peaks)),
        "block_size" => Some(SlotValue::Count(config.block_size)),
        "r_sigma" => Some(SlotValue::Real(config.r_sigma)),
        n => features.get(n).map(SlotValue::Real),
    }
}

fn condition_holds(c: &Condition, value: Option<f64>, learned: Option<f64>) -> bool {
    let Some(lhs) = value else { return false };
    let rhs = match &c.threshold {
        Threshold::Value(v) => *v,
        Threshold::Named(_) => match learned {
            Some(t) => t,
            // No learned threshold for this channel: the rule stays silent.
            None => return false,
        },
    };
    c.op.holds(lhs, rhs)
}

/// Builds the explanation for one classified series.
///
/// Normal predictions yield an inactive explanation. Channels appear in
/// feature-report order, and only when they hold at least one salient
/// point; within a channel, point sentences come first (strongest point
/// first, rules in order), then channel sentences. The novice sentence
/// names the salient point with the largest unscaled influence.
pub fn generate(
    prediction: &Prediction,
    salient_points: &[SalientPoint],
    feature_report: &FeatureReport,
    sanity: &SanityResult,
    level: Level,
    rules: &RuleBase,
    thresholds: &FeatureThresholds,
) -> Result<Explanation> {
    if prediction.label == Label::Normal {
        return Ok(Explanation::inactive(*prediction, level));
    }
    if sanity.original_prediction.label != prediction.label {
        return Err(Error::Report(
            "sanity result belongs to a different prediction".into(),
        ));
    }

    let entries: Vec<&PointEntry> = salient_points
        .iter()
        .map(|p| {
            feature_report
                .points
                .iter()
                .find(|e| e.channel == p.channel && e.features.index == p.index)
                .ok_or_else(|| {
                    Error::Report(format!(
                        "salient point ({}, {}) is missing from the feature report",
                        p.channel, p.index
                    ))
                })
        })
        .collect::<Result<_>>()?;

    let summary = fill(&rules.summary, |n| match n {
        "label" => Some(SlotValue::Text(match prediction.label {
            Label::Anomalous => "anomalous",
            Label::Normal => "normal",
        })),
        "probability" => Some(SlotValue::Real(prediction.probability)),
        _ => None,
    })?;

    let mut statements = Vec::new();
    let mut notes = Vec::new();
    let confidence = if salient_points.is_empty() {
        notes.push(rules.no_salient.clone());
        Confidence::Low
    } else {
        sanity.confidence
    };

    match level {
        Level::Novice => {
            if let Some(top) = salient_points
                .iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| {
                    a.raw_influence
                        .total_cmp(&b.raw_influence)
                        .then(ib.cmp(ia))
                })
                .map(|(_, p)| p)
            {
                let sentence = fill(&rules.novice, |n| match n {
                    "channel" => Some(SlotValue::Text(&top.channel)),
                    "index" => Some(SlotValue::Count(top.index)),
                    _ => None,
                })?;
                statements.push(ChannelStatement {
                    channel: top.channel.clone(),
                    sentences: vec![sentence],
                });
            }
        }
        Level::Expert => {
            for ch in &feature_report.channels {
                let points: Vec<&PointEntry> = entries
                    .iter()
                    .copied()
                    .filter(|e| e.channel == ch.channel)
                    .collect();
                if points.is_empty() {
                    continue;
                }
                let learned = thresholds.get(&ch.channel);
                let mut sentences = Vec::new();
                for entry in &points {
                    for rule in rules.rules.iter().filter(|r| r.scope == Scope::Point) {
                        let fires = rule.when.iter().all(|c| {
                            let v = if c.feature == "scaled_influence" {
                                Some(entry.scaled_influence)
                            } else {
                                entry.features.get(&c.feature)
                            };
                            condition_holds(c, v, None)
                        });
                        if fires {
                            sentences.push(fill(&rule.template, |n| point_lookup(entry, n))?);
                        }
                    }
                }
                for rule in rules.rules.iter().filter(|r| r.scope == Scope::Channel) {
                    let fires = rule.when.iter().all(|c| {
                        let t = learned.and_then(|m| m.get(&c.feature)).copied();
                        condition_holds(c, ch.features.get(&c.feature), t)
                    });
                    if fires {
                        sentences.push(fill(&rule.template, |n| {
                            channel_lookup(&ch.channel, &ch.features, &feature_report.config, n)
                        })?);
                    }
                }
                statements.push(ChannelStatement {
                    channel: ch.channel.clone(),
                    sentences,
                });
            }
        }
    }

    let confidence_sentence = match confidence {
        Confidence::High => rules.high_confidence.clone(),
        Confidence::Low => rules.low_confidence.clone(),
    };
    Ok(Explanation {
        active: true,
        level,
        prediction: *prediction,
        summary,
        statements,
        notes,
        confidence: Some(confidence),
        confidence_sentence,
        payload: Some(Payload {
            salient_points: salient_points.to_vec(),
            feature_report: feature_report.clone(),
            sanity: sanity.clone(),
        }),
    })
}

/// Linear-interpolated percentile of a non-empty sample.
fn percentile(values: &mut [f64], pct: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = pct / 100.0 * (values.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
}

/// Per-channel 95th percentile of every sequence feature over the normal
/// series of `dataset`.
pub fn learn_thresholds(dataset: &Dataset, config: &FeatureConfig) -> Result<FeatureThresholds> {
    let mut samples: BTreeMap<(usize, &str), Vec<f64>> = BTreeMap::new();
    for s in dataset.series.iter().filter(|s| s.label == Some(Label::Normal)) {
        for (c, ch) in s.channels.iter().enumerate() {
            let f = SequenceFeatures::compute(&ch.values, config)?;
            for name in SEQUENCE_FEATURES {
                samples
                    .entry((c, name))
                    .or_default()
                    .push(f.get(name).expect("known feature"));
            }
        }
    }
    let mut out = FeatureThresholds::new();
    for ((c, name), mut v) in samples {
        out.entry(dataset.channel_schema[c].clone())
            .or_default()
            .insert(name.to_string(), percentile(&mut v, THRESHOLD_PERCENTILE));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Channel, TimeSeries};
    use crate::features::{feature_report, FeatureConfig};
    use crate::sanity::SanityResult;

    fn sig4_cases() -> Vec<(f64, &'static str)> {
        vec![
            (5.1, "5.100"),
            (0.2, "0.2000"),
            (-2.46813, "-2.468"),
            (9.9996, "10.00"),
            (1234.6, "1235"),
            (12345.0, "1.234e4"),
            (0.00012344, "0.0001234"),
            (0.0, "0.000"),
        ]
    }

    #[test]
    fn four_significant_digits() {
        for (v, s) in sig4_cases() {
            assert_eq!(format_sig4(v), s, "{v}");
        }
    }

    #[test]
    fn default_rules_load() {
        let rb = RuleBase::default_rules();
        assert!(rb.rules.len() >= 12);
        let back = RuleBase::from_json(&rb.to_json()).unwrap();
        assert_eq!(back, rb);
    }

    #[test]
    fn rule_validation_errors() {
        let mut rb = RuleBase::default_rules();
        rb.rules[0].template = "{nonsense}".into();
        assert!(rb.validate().is_err());
        let mut rb = RuleBase::default_rules();
        rb.rules[0].when[0].feature = "lumpiness".into();
        assert!(rb.validate().is_err());
        let mut rb = RuleBase::default_rules();
        rb.rules[0].when[0].threshold = Threshold::Named("learned".into());
        assert!(rb.validate().is_err());
        assert!(RuleBase::from_json("{\"rules\": []}").is_err());
        assert!(parse_template("a {b").is_err());
        assert!(parse_template("a } b").is_err());
    }

    fn spiky_series() -> TimeSeries {
        let mut temp: Vec<f64> = (0..50).map(|t| (t as f64 * 0.3).sin()).collect();
        temp[23] = 6.0;
        let torque: Vec<f64> = (0..50).map(|t| (t as f64 * 0.2).cos()).collect();
        TimeSeries::new(
            1,
            vec![Channel::new("torque", torque), Channel::new("temperature", temp)],
            Some(Label::Anomalous),
        )
        .unwrap()
    }

    fn parts(flipped: bool) -> (Prediction, Vec<SalientPoint>, FeatureReport, SanityResult) {
        let s = spiky_series();
        let pred = Prediction::from_logit(2.0);
        let pts = vec![SalientPoint {
            channel: "temperature".into(),
            index: 23,
            scaled_influence: 1.0,
            raw_influence: 0.3,
            value: 6.0,
        }];
        let report = feature_report(&s, &pts, &FeatureConfig::default()).unwrap();
        let masked = Prediction::from_logit(if flipped { -1.0 } else { 1.0 });
        let sanity = SanityResult {
            original_prediction: pred,
            masked_prediction: masked,
            flipped,
            confidence: if flipped { Confidence::High } else { Confidence::Low },
            masked_series: s,
        };
        (pred, pts, report, sanity)
    }

    #[test]
    fn expert_mentions_spike_and_confidence() {
        let (pred, pts, report, sanity) = parts(true);
        let e = generate(&pred, &pts, &report, &sanity, Level::Expert, &RuleBase::default(), &FeatureThresholds::new())
            .unwrap();
        let text = e.render(RenderFormat::PlainText);
        let z = report.points[0].features.z_score;
        assert!(text.contains("temperature"));
        assert!(text.contains("index 23"));
        assert!(text.contains("highest spike"));
        assert!(text.contains(&format_sig4(z)));
        assert!(text.contains(&RuleBase::default().high_confidence));
        assert!(!text.contains("torque:"));
        let again = generate(&pred, &pts, &report, &sanity, Level::Expert, &RuleBase::default(), &FeatureThresholds::new())
            .unwrap();
        assert_eq!(again.render(RenderFormat::PlainText), text);
    }

    #[test]
    fn novice_is_one_sentence_without_feature_names() {
        let (pred, pts, report, sanity) = parts(false);
        let e = generate(&pred, &pts, &report, &sanity, Level::Novice, &RuleBase::default(), &FeatureThresholds::new())
            .unwrap();
        assert_eq!(e.statements.len(), 1);
        assert_eq!(e.statements[0].sentences.len(), 1);
        let text = e.render(RenderFormat::PlainText);
        for f in SEQUENCE_FEATURES.iter().chain(["lumpiness", "level shift"].iter()) {
            assert!(!text.contains(f), "{f} in {text}");
        }
        assert!(text.contains(&RuleBase::default().low_confidence));
    }

    #[test]
    fn learned_thresholds_gate_channel_rules() {
        let (pred, pts, report, sanity) = parts(true);
        let mut t = FeatureThresholds::new();
        t.entry("temperature".into()).or_default().insert("std_dev".into(), 0.0);
        let with = generate(&pred, &pts, &report, &sanity, Level::Expert, &RuleBase::default(), &t).unwrap();
        assert!(with.render(RenderFormat::PlainText).contains("std_dev ="));
        let without = generate(&pred, &pts, &report, &sanity, Level::Expert, &RuleBase::default(), &FeatureThresholds::new())
            .unwrap();
        assert!(!without.render(RenderFormat::PlainText).contains("std_dev ="));
    }

    #[test]
    fn no_salient_points_gives_low_confidence_note() {
        let (pred, _, report, sanity) = parts(true);
        let e = generate(&pred, &[], &report, &sanity, Level::Expert, &RuleBase::default(), &FeatureThresholds::new())
            .unwrap();
        assert_eq!(e.confidence, Some(Confidence::Low));
        assert!(e.statements.is_empty());
        assert_eq!(e.notes, vec![RuleBase::default().no_salient]);
    }

    #[test]
    fn inactive_rendering() {
        let e = Explanation::inactive(Prediction::from_logit(-3.0), Level::Expert);
        assert_eq!(e.render(RenderFormat::PlainText), "");
        assert_eq!(e.render(RenderFormat::Json), "{\"active\": false}");
        let (_, pts, report, sanity) = parts(true);
        let normal = Prediction::from_logit(-3.0);
        let e = generate(&normal, &pts, &report, &sanity, Level::Expert, &RuleBase::default(), &FeatureThresholds::new())
            .unwrap();
        assert!(!e.active);
    }

    #[test]
    fn json_round_trip() {
        let (pred, pts, report, sanity) = parts(true);
        let e = generate(&pred, &pts, &report, &sanity, Level::Expert, &RuleBase::default(), &FeatureThresholds::new())
            .unwrap();
        let back: Explanation = serde_json::from_str(&e.render(RenderFormat::Json)).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn thresholds_are_percentiles_of_normals() {
        let series: Vec<TimeSeries> = (0..21)
            .map(|i| {
                let v: Vec<f64> = (0..20).map(|t| (t as f64 * 0.5).sin() * (1.0 + i as f64)).collect();
                TimeSeries::new(i, vec![Channel::new("x", v)], Some(Label::Normal)).unwrap()
            })
            .collect();
        let ds = Dataset::new(series, vec!["x".into()], None).unwrap();
        let cfg = FeatureConfig::default();
        let t = learn_thresholds(&ds, &cfg).unwrap();
        // std scales with (1 + i); the 95th percentile of 21 samples is the 20th order statistic.
        let base = crate::features::std_dev(&ds.series[0].channels[0].values).unwrap();
        assert!((t["x"]["std_dev"] - 20.0 * base).abs() < 1e-9);
        assert_eq!(t["x"].len(), 6);
    }
}

//! Seeded generator of a small Malay-like corpus built from templates and
//! gazetteers, used for end-to-end experiments where no real data exists.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{GazetteerEntry, Rule, RuleConfig, RulePosition};
use crate::corpus::{EntityType, LabeledSentence, NerLabel, Provenance, SentenceId};

const GIVEN: &[&str] = &[
    "Ahmad", "Aminah", "Azman", "Faridah", "Hafiz", "Hamidah", "Ismail", "Kamal", "Latifah",
    "Mahmud", "Nurul", "Osman", "Rahim", "Rosnah", "Salleh", "Siti", "Yusof", "Zainab", "Zulkifli",
    "Halim", "Razak", "Fatimah", "Hassan", "Noraini",
];

const FAMILY: &[&str] = &[
    "Abdullah", "Ibrahim", "Hussein", "Omar", "Ali", "Bakar", "Musa", "Yaakob", "Sulaiman", "Daud",
];

const PLACES: &[&str] = &[
    "Kuala Lumpur", "Johor Bahru", "Pulau Pinang", "Kota Kinabalu", "Shah Alam", "Ipoh", "Melaka",
    "Kuching", "Alor Setar", "Kota Bharu", "Seremban", "Kuantan", "Putrajaya", "Sungai Petani",
    "Batu Pahat", "Teluk Intan", "Miri", "Sandakan",
];

const ORG_HEADS: &[&str] = &[
    "Petronas", "Maybank", "Universiti Malaya", "Bank Negara Malaysia", "Tenaga Nasional",
    "Universiti Kebangsaan Malaysia", "Telekom Malaysia", "Pos Malaysia",
    "Felda", "Sime Darby", "Jabatan Perangkaan",
];

const COMPANY_STEMS: &[&str] = &["Maju Jaya", "Sinar Harapan", "Cahaya Timur", "Bumi Hijau", "Sri Murni"];

const SYLLABLES: &[&str] = &[
    "ba", "da", "ha", "ka", "la", "ma", "na", "ra", "sa", "ta", "di", "ri", "si", "mu", "su", "ru",
    "lan", "man", "din", "dan", "rin", "tar",
];

const TITLES: &[&str] = &["Encik", "Puan", "Datuk", "Tuan", "Cik"];

const DAYS: &[&str] = &["Isnin", "Selasa", "Rabu", "Khamis", "Jumaat", "Sabtu", "Ahad"];

const NOUNS: &[&str] = &["projek", "laporan", "program", "rancangan", "kempen", "mesyuarat", "pelaburan"];

const ADJS: &[&str] = &["baharu", "besar", "penting", "khas", "tahunan"];

/// Templates over slots `{PER}`, `{LOC}`, `{ORG}` and the filler slots
/// `{TITLE}`, `{DAY}`, `{NOUN}`, `{ADJ}`, `{NUM}`. Several put two entities
/// next to each other.
const TEMPLATES: &[&str] = &[
    "{TITLE} {PER} pergi ke {LOC} pada hari {DAY} .",
    "{PER} {LOC} dan {PER} {LOC} bertanding .",
    "Pasukan {LOC} menang menentang {ORG} .",
    "{ORG} membuka cawangan {ADJ} di {LOC} .",
    "Menurut {PER} , {ORG} akan melabur {NUM} juta di {LOC} .",
    "{PER} bekerja di {ORG} sejak tahun {NUM} .",
    "Mesyuarat {ORG} di {LOC} dihadiri oleh {TITLE} {PER} .",
    "{LOC} {ORG} mengumumkan {NOUN} {ADJ} pada hari {DAY} .",
    "Wakil {ORG} {PER} melawat {LOC} semalam .",
    "{TITLE} {PER} dan {TITLE} {PER} tiba di {LOC} .",
    "Penduduk {LOC} menyambut baik {NOUN} {ORG} .",
    "{NOUN} {ADJ} itu dirasmikan oleh {PER} di {LOC} .",
    "Pada hari {DAY} , {PER} dilantik sebagai pengarah {ORG} .",
    "{ORG} dan {ORG} menandatangani perjanjian di {LOC} .",
    "Kenyataan {PER} disiarkan oleh {ORG} .",
    "Harga rumah di {LOC} naik {NUM} peratus .",
    "{PER} berasal dari {LOC} {LOC} .",
    "Seramai {NUM} orang menghadiri {NOUN} anjuran {ORG} .",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub sentences: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sentences: 2000,
            seed: 7,
        }
    }
}

/// A capitalized two- or three-syllable word; most are unique to a sentence.
fn coined<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(2..=3);
    let word: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
    let mut c = word.chars();
    let first = c.next().unwrap().to_uppercase();
    first.chain(c).collect()
}

fn family<R: Rng>(rng: &mut R) -> String {
    if rng.gen_bool(0.5) {
        coined(rng)
    } else {
        FAMILY.choose(rng).unwrap().to_string()
    }
}

fn person<R: Rng>(rng: &mut R) -> String {
    let given = if rng.gen_bool(0.3) {
        coined(rng)
    } else {
        GIVEN.choose(rng).unwrap().to_string()
    };
    match rng.gen_range(0..4) {
        0 => given.to_string(),
        1 => format!("{given} {}", family(rng)),
        _ => {
            let link = if rng.gen_bool(0.5) { "bin" } else { "binti" };
            format!("{given} {link} {}", family(rng))
        }
    }
}

const PLACE_PREFIXES: &[&str] = &["Kampung", "Bandar", "Taman", "Pekan"];

fn place<R: Rng>(rng: &mut R) -> String {
    let roll: f64 = rng.gen();
    if roll < 0.6 {
        PLACES.choose(rng).unwrap().to_string()
    } else if roll < 0.8 {
        format!("{} {}", PLACE_PREFIXES.choose(rng).unwrap(), coined(rng))
    } else {
        coined(rng)
    }
}

const ORG_WITH_PLACE: &[&str] = &["Majlis Bandaraya", "Universiti", "Hospital", "Pejabat Tanah", "Kelab Bola Sepak"];

fn organization<R: Rng>(rng: &mut R) -> String {
    let roll: f64 = rng.gen();
    if roll < 0.25 {
        // the place name inside belongs to the organization span
        format!("{} {}", ORG_WITH_PLACE.choose(rng).unwrap(), PLACES.choose(rng).unwrap())
    } else if roll < 0.5 {
        let suffix = if rng.gen_bool(0.5) { "Sdn Bhd" } else { "Berhad" };
        let stem = if rng.gen_bool(0.5) {
            format!("{} {}", coined(rng), coined(rng))
        } else {
            COMPANY_STEMS.choose(rng).unwrap().to_string()
        };
        format!("{stem} {suffix}")
    } else {
        ORG_HEADS.choose(rng).unwrap().to_string()
    }
}

fn push_entity(tokens: &mut Vec<String>, tags: &mut Vec<NerLabel>, surface: &str, t: EntityType) {
    for (k, w) in surface.split(' ').enumerate() {
        tokens.push(w.to_string());
        tags.push(if k == 0 { t.begin() } else { t.inside() });
    }
}

fn render<R: Rng>(template: &str, rng: &mut R) -> (Vec<String>, Vec<NerLabel>) {
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut prev_loc: Option<String> = None;
    for slot in template.split(' ') {
        match slot {
            "{PER}" => push_entity(&mut tokens, &mut tags, &person(rng), EntityType::Per),
            "{ORG}" => push_entity(&mut tokens, &mut tags, &organization(rng), EntityType::Org),
            "{LOC}" => {
                // two adjacent places must differ, or they read as one name
                let loc = loop {
                    let l = place(rng);
                    if prev_loc.as_deref() != Some(l.as_str()) {
                        break l;
                    }
                };
                push_entity(&mut tokens, &mut tags, &loc, EntityType::Loc);
                prev_loc = Some(loc);
                continue;
            }
            other => {
                let word = match other {
                    "{TITLE}" => TITLES.choose(rng).unwrap().to_string(),
                    "{DAY}" => DAYS.choose(rng).unwrap().to_string(),
                    "{NOUN}" => NOUNS.choose(rng).unwrap().to_string(),
                    "{ADJ}" => ADJS.choose(rng).unwrap().to_string(),
                    "{NUM}" => rng.gen_range(2..2000).to_string(),
                    w => w.to_string(),
                };
                tokens.push(word);
                tags.push(NerLabel::O);
            }
        }
        prev_loc = None;
    }
    // a rare lowercase word between two tokens, never inside an entity
    if rng.gen_bool(0.3) {
        let gaps: Vec<usize> = (1..tokens.len()).filter(|&k| !tags[k].is_inside()).collect();
        if let Some(&k) = gaps.choose(rng) {
            tokens.insert(k, coined(rng).to_lowercase());
            tags.insert(k, NerLabel::O);
        }
    }
    (tokens, tags)
}

/// Generates `cfg.sentences` labeled sentences; identical configs give
/// identical corpora.
pub fn generate(cfg: &SynthConfig) -> Vec<LabeledSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.sentences)
        .map(|i| {
            let template = TEMPLATES.choose(&mut rng).unwrap();
            let (tokens, tags) = render(template, &mut rng);
            LabeledSentence::new(SentenceId::new("synth", i), tokens, tags, Provenance::Synthetic)
                .expect("templates produce valid sentences")
        })
        .collect()
}

/// Rules and gazetteer matching the generator's vocabulary, for running the
/// rule tagger over synthetic text.
pub fn rule_config() -> RuleConfig {
    let mut gazetteer: Vec<GazetteerEntry> = PLACES
        .iter()
        .map(|s| GazetteerEntry {
            surface: s.to_string(),
            etype: EntityType::Loc,
        })
        .collect();
    gazetteer.extend(ORG_HEADS.iter().map(|s| GazetteerEntry {
        surface: s.to_string(),
        etype: EntityType::Org,
    }));
    RuleConfig {
        case_fold: false,
        rules: vec![
            Rule {
                id: "title".into(),
                triggers: TITLES.iter().map(|s| s.to_string()).collect(),
                position: RulePosition::PrecedesEntity,
                assigned_type: EntityType::Per,
                capitalization_required: true,
                max_span_len: 2,
            },
            Rule {
                id: "company-suffix".into(),
                triggers: vec!["Berhad".into(), "Bhd".into()],
                position: RulePosition::FollowsEntity,
                assigned_type: EntityType::Org,
                capitalization_required: true,
                max_span_len: 2,
            },
        ],
        gazetteer,
    }
}

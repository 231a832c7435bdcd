//! Offline provider. Output is a pure function of (seed, stage, context,
//! chat history), so classroom demos run instantly and tests are
//! reproducible. Failure modes exist to drive the repair and error paths.

use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{CompletionOptions, Provider, ProviderError};
use crate::agents::schema::{
    CharacterDraft, ContextDocument, DialogueDraft, PlotDraft, PlotRef, RelationshipDraft,
    SceneDraft,
};
use crate::agents::{ChatRole, PromptBundle, Purpose};
use crate::model::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MockMode {
    #[default]
    Normal,
    /// Every functional answer is a truncated, unterminated block.
    Malformed,
    /// Every functional answer is prose with no structured block.
    Prose,
    /// Character casts always contain a repeated name.
    DuplicateNames,
    /// Transport failure whenever the given stage is generated.
    FailAt(Stage),
    /// The first `n` functional calls are malformed, later ones are fine.
    FlakyMalformed(u32),
}

#[derive(Debug, Default)]
pub struct MockProvider {
    mode: MockMode,
    delay: Option<Duration>,
    functional_calls: AtomicU32,
    calls: AtomicU32,
}

const NAMES: &[&str] = &[
    "Lin", "Mei", "Arun", "Sofia", "Kofi", "Hana", "Tomas", "Priya", "Jonah", "Amara", "Elias",
    "Nadia", "Ravi", "Yuki", "Marta", "Omar",
];
const PERSONALITIES: &[&str] = &[
    "quiet and observant, slow to trust",
    "bold, talks before thinking",
    "careful planner who hates surprises",
    "warm, jokes to hide worry",
    "stubborn and proud",
    "curious, asks too many questions",
    "loyal but easily hurt",
    "ambitious and restless",
];
const BACKGROUNDS: &[&str] = &[
    "grew up above the family shop",
    "new to the school this term",
    "looks after a younger brother",
    "once won the city science fair",
    "moved here from the coast",
    "works weekends at the library",
    "lost a close friend last year",
    "captain of the debate club",
];
const BONDS: &[&str] = &[
    "childhood friend",
    "rival",
    "older cousin",
    "classmate who owes a favour",
    "neighbour",
    "former best friend",
];
const PLOT_TITLES: &[&str] = &[
    "The Discovery",
    "A Secret Shared",
    "The Argument",
    "Turning Point",
    "The Wrong Choice",
    "Consequences",
    "The Reveal",
    "Making Amends",
    "Under Pressure",
    "The Last Chance",
];
const PLOT_VERBS: &[&str] = &[
    "confronts",
    "confides in",
    "hides the truth from",
    "asks for help from",
    "challenges",
    "forgives",
];
const SETTINGS: &[&str] = &[
    "School library",
    "Rooftop garden",
    "Kitchen of the family flat",
    "Empty classroom",
    "Bus stop in the rain",
    "Community hall",
    "Park bench by the river",
    "Corridor outside the principal's office",
];
const TIMES: &[&str] = &[
    "Early morning",
    "Lunch break",
    "After school",
    "Late evening",
    "Saturday afternoon",
    "Midnight",
];
const LINES: &[&str] = &[
    "I found something you need to see.",
    "Why didn't you tell me before?",
    "You always decide everything without asking me.",
    "I was scared you would laugh at me.",
    "We can still fix this if we start now.",
    "That is not what happened and you know it.",
    "Promise me you won't tell anyone.",
    "I thought we were on the same side.",
    "Look at this page. Read it out loud.",
    "Maybe I was wrong about you.",
    "If we do nothing, everyone loses.",
    "Fine. Then I'll do it alone.",
    "Wait. Don't go yet.",
    "I kept it because it was hers.",
    "Say it again, slowly this time.",
    "Thank you for staying.",
];
const DELIVERIES: &[&str] = &["whispering", "angrily", "after a pause", "laughing", "softly", "firmly"];

fn tutor_questions(stage: Stage) -> &'static [&'static str] {
    match stage {
        Stage::Logline => &[
            "Who is the one person this story cannot happen without?",
            "What does your main character want badly enough to take a risk?",
            "What is standing in the way, and why can't it simply be avoided?",
            "How would the story change if it started on the worst day of their life?",
        ],
        Stage::Characters => &[
            "Which two characters want opposite things?",
            "What is one secret your main character keeps from the others?",
            "Who in the cast would the audience misjudge at first?",
            "What would make the quietest character finally speak up?",
        ],
        Stage::Plots => &[
            "What event forces the characters to act instead of talk?",
            "Where is the moment when things look hopeless?",
            "Which earlier event should come back to cause trouble later?",
            "What does the ending cost your main character?",
        ],
        Stage::Scenes => &[
            "Which scene needs a place where people can be overheard?",
            "Who should be absent from the big scene, and why?",
            "Could two of these events happen in the same room?",
            "What time of day makes the tension sharper?",
        ],
        Stage::Dialogues => &[
            "What would this character never say out loud?",
            "How does each character sound different when angry?",
            "Which line could carry the whole scene if everything else were cut?",
            "Can the audience learn the setting only from what people say?",
        ],
    }
}

const ALTERNATIVES: &[&str] = &[
    "One option is to raise the stakes early; another is to let the pressure build slowly.",
    "You could tell it from the outsider's point of view, or from the person with most to lose.",
    "Try a version where the conflict is between friends, and one where it is with an authority figure.",
    "You might keep it small and personal, or connect it to something the whole class cares about.",
];

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_mode(mode: MockMode) -> Self {
        MockProvider {
            mode,
            ..Self::default()
        }
    }

    /// Sleep before answering, to exercise slow-provider handling.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn mode(&self) -> MockMode {
        self.mode
    }

    /// Total number of completions served.
    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }

    fn rng(bundle: &PromptBundle, seed: u64) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(bundle.stage.as_str().as_bytes());
        hasher.update(Sha256::digest(bundle.context_text.as_bytes()));
        if bundle.purpose == Purpose::Tutor {
            for m in &bundle.history {
                hasher.update([m.role as u8]);
                hasher.update(m.text.as_bytes());
                hasher.update([0]);
            }
        }
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }

    fn functional(&self, bundle: &PromptBundle, rng: &mut ChaCha8Rng) -> Result<String, ProviderError> {
        let call = self.functional_calls.fetch_add(1, Ordering::SeqCst);
        match self.mode {
            MockMode::FailAt(stage) if stage == bundle.stage => {
                return Err(ProviderError::Transport(format!(
                    "mock connection reset while generating {stage}"
                )))
            }
            MockMode::Malformed => return Ok(malformed(bundle.stage)),
            MockMode::FlakyMalformed(n) if call < n => return Ok(malformed(bundle.stage)),
            MockMode::Prose => {
                return Ok(format!(
                    "For the {} I would suggest keeping things simple and focused on the main conflict. \
                     Think about what each person wants and let that drive the story.",
                    bundle.stage
                ))
            }
            _ => {}
        }
        let context: ContextDocument = serde_json::from_str(&bundle.context_text).unwrap_or_default();
        let body = match bundle.stage {
            Stage::Logline => return Ok("A logline is written by the students.".into()),
            Stage::Characters => {
                let mut cast = characters(rng, bundle.count_hint);
                if self.mode == MockMode::DuplicateNames && cast.len() >= 2 {
                    let (old, new) = (cast[1].name.clone(), cast[0].name.clone());
                    for c in &mut cast {
                        for r in &mut c.relationships {
                            if r.with == old {
                                r.with = new.clone();
                            }
                        }
                    }
                    cast[1].name = new;
                }
                json!({ "characters": cast })
            }
            Stage::Plots => json!({ "plots": plots(rng, &context, bundle.count_hint) }),
            Stage::Scenes => json!({ "scenes": scenes(rng, &context) }),
            Stage::Dialogues => json!({ "dialogues": dialogues(rng, &context) }),
        };
        Ok(format!(
            "Here are the {} for \"{}\".\n\n```json\n{}\n```\n\nTell me if you want any of them changed.",
            bundle.stage,
            context.title,
            serde_json::to_string_pretty(&body).expect("json value serializes")
        ))
    }

    fn tutor(&self, bundle: &PromptBundle, rng: &mut ChaCha8Rng) -> String {
        let last = bundle
            .history
            .iter()
            .rev()
            .find(|m| m.role == ChatRole::User)
            .map(|m| m.text.trim())
            .unwrap_or("");
        let snippet: String = last.chars().take(60).collect();
        let ellipsis = if last.chars().count() > 60 { "..." } else { "" };
        let questions = tutor_questions(bundle.stage);
        let mut picked: Vec<&str> = questions.choose_multiple(rng, 2).copied().collect();
        picked.sort_unstable();
        let alternative = ALTERNATIVES.choose(rng).expect("non-empty pool");
        format!(
            "You said: \"{snippet}{ellipsis}\". {} {} {alternative}",
            picked[0], picked[1]
        )
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(
        &self,
        bundle: &PromptBundle,
        options: &CompletionOptions,
    ) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some(delay) = self.delay {
            std::thread::sleep(delay);
        }
        let mut rng = Self::rng(bundle, options.seed);
        match bundle.purpose {
            Purpose::Tutor => Ok(self.tutor(bundle, &mut rng)),
            Purpose::Functional => self.functional(bundle, &mut rng),
        }
    }
}

fn malformed(stage: Stage) -> String {
    format!(
        "Sure! Here is the {stage}:\n\n```json\n{{\"{stage}\": [{{\"name\": \"Lin\", \"title\": \"The Discovery\", \"summary\": "
    )
}

fn count(rng: &mut ChaCha8Rng, hint: Option<u32>, low: usize, high: usize, cap: usize) -> usize {
    match hint {
        Some(n) => (n as usize).clamp(1, cap),
        None => rng.gen_range(low..=high).min(cap),
    }
}

fn characters(rng: &mut ChaCha8Rng, hint: Option<u32>) -> Vec<CharacterDraft> {
    let n = count(rng, hint, 2, 5, NAMES.len());
    let names: Vec<&str> = NAMES.choose_multiple(rng, n).copied().collect();
    let mut cast = Vec::with_capacity(n);
    for (i, name) in names.iter().enumerate() {
        let relationships = if i == 0 {
            Vec::new()
        } else {
            vec![RelationshipDraft {
                with: names[i - 1].to_string(),
                description: BONDS.choose(rng).expect("non-empty pool").to_string(),
            }]
        };
        cast.push(CharacterDraft {
            name: name.to_string(),
            personality: PERSONALITIES.choose(rng).expect("non-empty pool").to_string(),
            background: BACKGROUNDS.choose(rng).expect("non-empty pool").to_string(),
            relationships,
        });
    }
    cast
}

fn plots(rng: &mut ChaCha8Rng, context: &ContextDocument, hint: Option<u32>) -> Vec<PlotDraft> {
    let cast: Vec<String> = context
        .characters
        .iter()
        .flatten()
        .map(|c| c.name.clone())
        .collect();
    let n = count(rng, hint, 3, 5, PLOT_TITLES.len());
    let titles: Vec<&str> = PLOT_TITLES.choose_multiple(rng, n).copied().collect();
    (1..=n)
        .map(|ordinal| {
            let k = rng.gen_range(2..=3).min(cast.len());
            let mut involved: Vec<String> = cast.choose_multiple(rng, k).cloned().collect();
            involved.sort_by_key(|name| cast.iter().position(|c| c == name));
            let mut causes = Vec::new();
            if ordinal > 1 {
                causes.push(PlotRef::Ordinal(ordinal as u32 - 1));
                if ordinal > 2 && rng.gen_bool(0.3) {
                    causes.insert(0, PlotRef::Ordinal(ordinal as u32 - 2));
                }
            }
            let summary = match involved.as_slice() {
                [a, b, ..] => format!(
                    "{a} {} {b}.",
                    PLOT_VERBS.choose(rng).expect("non-empty pool")
                ),
                [a] => format!("{a} faces the problem alone."),
                [] => "Something changes for everyone.".to_string(),
            };
            PlotDraft {
                ordinal: Some(ordinal as u32),
                title: titles[ordinal - 1].to_string(),
                summary,
                causes,
                characters: involved,
            }
        })
        .collect()
}

fn scenes(rng: &mut ChaCha8Rng, context: &ContextDocument) -> Vec<SceneDraft> {
    context
        .plots
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, plot)| SceneDraft {
            ordinal: Some(i as u32 + 1),
            setting: SETTINGS.choose(rng).expect("non-empty pool").to_string(),
            time: TIMES.choose(rng).expect("non-empty pool").to_string(),
            plots: vec![PlotRef::Ordinal(plot.ordinal.unwrap_or(i as u32 + 1))],
            participants: plot.characters.clone(),
        })
        .collect()
}

fn dialogues(rng: &mut ChaCha8Rng, context: &ContextDocument) -> Vec<DialogueDraft> {
    let mut out = Vec::new();
    for (i, scene) in context.scenes.iter().flatten().enumerate() {
        if scene.participants.is_empty() {
            continue;
        }
        let n = rng.gen_range(4..=6);
        let start = rng.gen_range(0..scene.participants.len());
        let lines: Vec<&str> = LINES.choose_multiple(rng, n).copied().collect();
        for (k, line) in lines.into_iter().enumerate() {
            let speaker = &scene.participants[(start + k) % scene.participants.len()];
            let delivery = rng
                .gen_bool(0.25)
                .then(|| DELIVERIES.choose(rng).expect("non-empty pool").to_string());
            out.push(DialogueDraft {
                scene: scene.ordinal.unwrap_or(i as u32 + 1),
                speaker: speaker.clone(),
                line: line.to_string(),
                delivery,
            });
        }
    }
    out
}

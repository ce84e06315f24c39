//! Fixed vocabulary of simulated error modes and distractor hints.

/// One way the simulated recommender goes wrong, with the hint wording that
/// fixes it. Every paraphrase contains a token starting with `stem`.
#[derive(Debug, Clone, Copy)]
pub struct ModeTemplate {
    pub tag: &'static str,
    pub stem: &'static str,
    pub genre: &'static str,
    pub description: &'static str,
    pub paraphrases: &'static [&'static str],
}

pub const MODE_LIBRARY: [ModeTemplate; 24] = [
    ModeTemplate {
        tag: "era",
        stem: "year",
        genre: "period",
        description: "ignores the era preference carried by release years",
        paraphrases: &[
            "Consider the release years of movies in the user's history for era preference.",
            "Think about the production year of watched movies, recommend movies in that era from the candidate set.",
        ],
    },
    ModeTemplate {
        tag: "cast",
        stem: "actor",
        genre: "ensemble",
        description: "misses the lead actors shared across the session",
        paraphrases: &[
            "Look at the lead actors who recur across the session and favour candidates sharing them.",
            "Check which actors appear repeatedly and prefer titles starring them.",
        ],
    },
    ModeTemplate {
        tag: "adaptation",
        stem: "adapt",
        genre: "literary",
        description: "overlooks that the watched titles are book adaptations",
        paraphrases: &[
            "Check whether the watched titles are adaptations of novels and prefer similar adaptations.",
            "Notice the pattern of adapted stories and pick another adapted work.",
        ],
    },
    ModeTemplate {
        tag: "acclaim",
        stem: "acclaim",
        genre: "arthouse",
        description: "underweights critical acclaim",
        paraphrases: &[
            "Weigh critical acclaim, the user seems to pick highly acclaimed works.",
            "Prefer acclaimed titles, since acclaim drives this user's choices.",
        ],
    },
    ModeTemplate {
        tag: "mood",
        stem: "mood",
        genre: "atmospheric",
        description: "matches keywords instead of the session mood",
        paraphrases: &[
            "Match the overall mood of the session rather than surface keywords.",
            "Rank by mood similarity to the recent history.",
        ],
    },
    ModeTemplate {
        tag: "platform",
        stem: "platform",
        genre: "console",
        description: "ignores which gaming platform the purchases target",
        paraphrases: &[
            "Notice the gaming platform the purchases target and stay on that platform.",
            "Recommend items for the same platform as earlier purchases.",
        ],
    },
    ModeTemplate {
        tag: "accessories",
        stem: "accessor",
        genre: "peripheral",
        description: "forgets complementary accessories",
        paraphrases: &[
            "Complementary accessories for recently bought devices are likely next.",
            "Suggest accessories that go with the devices already bought.",
        ],
    },
    ModeTemplate {
        tag: "family",
        stem: "famil",
        genre: "kids",
        description: "misses the family viewing context",
        paraphrases: &[
            "The session suggests family viewing, so favour family friendly picks.",
            "Think of family audiences when ranking the candidates.",
        ],
    },
    ModeTemplate {
        tag: "mobile",
        stem: "mobile",
        genre: "handheld",
        description: "ignores the focus on mobile gear",
        paraphrases: &[
            "Purchases centre on mobile gear, so prefer mobile compatible items.",
            "Keep to mobile devices and their add-ons.",
        ],
    },
    ModeTemplate {
        tag: "comedy",
        stem: "comed",
        genre: "comedy",
        description: "misses the preference for comedy",
        paraphrases: &[
            "The history shows a preference for comedy, so rank comedies higher.",
            "Lean towards comedic titles like the ones already watched.",
        ],
    },
    ModeTemplate {
        tag: "director",
        stem: "director",
        genre: "auteur",
        description: "overlooks the shared director",
        paraphrases: &[
            "Several watched titles share a director, look for that director's other work.",
            "Prefer candidates made by the same director as the history.",
        ],
    },
    ModeTemplate {
        tag: "country",
        stem: "countr",
        genre: "foreign",
        description: "ignores the common country of origin",
        paraphrases: &[
            "Consider the country of origin common to the watched titles.",
            "Favour candidates from the same country as the history.",
        ],
    },
    ModeTemplate {
        tag: "franchise",
        stem: "franchis",
        genre: "saga",
        description: "breaks out of the franchise the user follows",
        paraphrases: &[
            "Items belong to one franchise, continue within that franchise.",
            "Stay inside the franchise the user is working through.",
        ],
    },
    ModeTemplate {
        tag: "soundtrack",
        stem: "soundtrack",
        genre: "musical",
        description: "misses the soundtrack driven taste",
        paraphrases: &[
            "Pay attention to soundtrack driven picks such as musicals.",
            "The user values a strong soundtrack, rank accordingly.",
        ],
    },
    ModeTemplate {
        tag: "brand",
        stem: "brand",
        genre: "designer",
        description: "ignores brand loyalty",
        paraphrases: &[
            "The user sticks to one brand, keep to that brand.",
            "Prefer candidates from the brand seen most often.",
        ],
    },
    ModeTemplate {
        tag: "price",
        stem: "price",
        genre: "budget",
        description: "ignores the price range of earlier purchases",
        paraphrases: &[
            "Respect the price range of earlier purchases.",
            "Recommend items priced like the ones already bought.",
        ],
    },
    ModeTemplate {
        tag: "sequel",
        stem: "sequel",
        genre: "continuation",
        description: "misses obvious sequels",
        paraphrases: &[
            "Look for sequels to titles already in the history.",
            "A sequel of a watched title is the natural next pick.",
        ],
    },
    ModeTemplate {
        tag: "animation",
        stem: "animat",
        genre: "cartoon",
        description: "overlooks that the session is mostly animation",
        paraphrases: &[
            "The session is mostly animation, prefer animated titles.",
            "Rank animated candidates above live action.",
        ],
    },
    ModeTemplate {
        tag: "documentary",
        stem: "documentar",
        genre: "nonfiction",
        description: "misses the documentary focus",
        paraphrases: &[
            "Documentaries dominate the history, surface documentaries.",
            "Prefer documentary titles over fiction.",
        ],
    },
    ModeTemplate {
        tag: "holiday",
        stem: "holiday",
        genre: "seasonal",
        description: "ignores the seasonal holiday context",
        paraphrases: &[
            "Seasonal holiday picks fit this session best.",
            "Think of holiday themed candidates first.",
        ],
    },
    ModeTemplate {
        tag: "indie",
        stem: "indie",
        genre: "independent",
        description: "misses the taste for indie productions",
        paraphrases: &[
            "Favour indie productions similar to the watched ones.",
            "Small indie titles suit this user better than blockbusters.",
        ],
    },
    ModeTemplate {
        tag: "classic",
        stem: "classic",
        genre: "vintage",
        description: "ignores the taste for classics",
        paraphrases: &[
            "The user enjoys classics, prefer older classic titles.",
            "Rank classic works above recent releases.",
        ],
    },
    ModeTemplate {
        tag: "multiplayer",
        stem: "multiplayer",
        genre: "online",
        description: "ignores the multiplayer focus",
        paraphrases: &[
            "Multiplayer games dominate, recommend multiplayer titles.",
            "Prefer games with multiplayer modes.",
        ],
    },
    ModeTemplate {
        tag: "horror",
        stem: "horror",
        genre: "horror",
        description: "misses the appetite for horror",
        paraphrases: &[
            "Horror fans tend to continue with horror, rank horror titles first.",
            "Put horror candidates at the top.",
        ],
    },
];

/// Plausible but useless hints. None contains a mode stem.
pub const DISTRACTOR_HINTS: [&str; 10] = [
    "Focus on items the user interacted with most recently.",
    "Consider diversity across the candidate set before ranking.",
    "Pay attention to the overall length of the session.",
    "Think about what a typical user would pick after this sequence.",
    "Prefer candidates whose titles resemble the history.",
    "Avoid repeating items the user has already seen.",
    "Balance popularity against novelty when ranking.",
    "Read the candidate list carefully before answering.",
    "Check for words that recur across earlier picks.",
    "Consider how the user's taste evolves over the session.",
];

pub(crate) const TITLE_ADJECTIVES: [&str; 16] = [
    "Silent", "Golden", "Broken", "Hidden", "Crimson", "Distant", "Frozen", "Wild", "Electric", "Paper", "Iron",
    "Velvet", "Hollow", "Bright", "Lost", "Midnight",
];

pub(crate) const TITLE_NOUNS: [&str; 16] = [
    "River", "Garden", "Engine", "Harbor", "Mirror", "Signal", "Forest", "Lantern", "Circuit", "Canyon", "Orchard",
    "Meadow", "Tower", "Voyage", "Compass", "Island",
];

pub(crate) const BRANDS: [&str; 8] = ["Acme", "Northwind", "Globex", "Initech", "Umbra", "Vertex", "Zenith", "Halcyon"];

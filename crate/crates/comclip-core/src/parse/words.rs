//! Frozen word lists for the rule-based parser.
//!
//! The stop-word list is the standard NLTK English list plus a handful of
//! quantifiers and adverbs that never carry entity content in captions.
//! All lists are sorted for binary search; `lists_are_sorted` guards that.

/// Words removed from the sentence before SVO extraction.
pub const STOP_WORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "ain",
    "all",
    "almost",
    "already",
    "also",
    "always",
    "am",
    "an",
    "and",
    "any",
    "are",
    "aren",
    "aren't",
    "as",
    "at",
    "away",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "busily",
    "but",
    "by",
    "calmly",
    "can",
    "carefully",
    "couldn",
    "couldn't",
    "couple",
    "currently",
    "d",
    "did",
    "didn",
    "didn't",
    "do",
    "does",
    "doesn",
    "doesn't",
    "doing",
    "don",
    "don't",
    "down",
    "during",
    "each",
    "easily",
    "eight",
    "few",
    "five",
    "for",
    "four",
    "from",
    "further",
    "gently",
    "gracefully",
    "had",
    "hadn",
    "hadn't",
    "happily",
    "has",
    "hasn",
    "hasn't",
    "have",
    "haven",
    "haven't",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "isn",
    "isn't",
    "it",
    "it's",
    "its",
    "itself",
    "just",
    "ll",
    "loudly",
    "m",
    "ma",
    "many",
    "maybe",
    "me",
    "might",
    "mightn",
    "mightn't",
    "more",
    "most",
    "much",
    "must",
    "mustn",
    "mustn't",
    "my",
    "myself",
    "nearly",
    "needn",
    "needn't",
    "never",
    "nine",
    "no",
    "nor",
    "not",
    "now",
    "o",
    "of",
    "off",
    "often",
    "on",
    "once",
    "one",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "perhaps",
    "playfully",
    "proudly",
    "quickly",
    "quietly",
    "quite",
    "rather",
    "re",
    "really",
    "recently",
    "s",
    "same",
    "seven",
    "several",
    "shan",
    "shan't",
    "she",
    "she's",
    "should",
    "should've",
    "shouldn",
    "shouldn't",
    "silently",
    "six",
    "slowly",
    "so",
    "some",
    "sometimes",
    "still",
    "such",
    "t",
    "ten",
    "than",
    "that",
    "that'll",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "three",
    "through",
    "to",
    "together",
    "too",
    "two",
    "under",
    "until",
    "up",
    "ve",
    "very",
    "was",
    "wasn",
    "wasn't",
    "we",
    "were",
    "weren",
    "weren't",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "won",
    "won't",
    "would",
    "wouldn",
    "wouldn't",
    "y",
    "you",
    "you'd",
    "you'll",
    "you're",
    "you've",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

/// Relation words kept as predicate heads (prepositions the stop list does
/// not remove, linking two noun phrases).
pub const REL_WORDS: &[&str] = &[
    "across",
    "along",
    "alongside",
    "amid",
    "amidst",
    "around",
    "atop",
    "behind",
    "beneath",
    "beside",
    "inside",
    "near",
    "next",
    "onto",
    "opposite",
    "outside",
    "past",
    "toward",
    "towards",
    "underneath",
    "upon",
    "within",
    "without",
];

/// Common caption verbs (stems). Inflected forms are reduced to a stem by
/// `is_verb_token` before lookup.
pub const VERB_STEMS: &[&str] = &[
    "approach",
    "bake",
    "bark",
    "bathe",
    "bend",
    "bite",
    "blow",
    "bounce",
    "bow",
    "break",
    "brush",
    "build",
    "bump",
    "burn",
    "buy",
    "call",
    "carry",
    "carve",
    "catch",
    "chase",
    "cheer",
    "chew",
    "chop",
    "clap",
    "clean",
    "climb",
    "close",
    "collect",
    "comb",
    "cook",
    "crawl",
    "cross",
    "cry",
    "cuddle",
    "cut",
    "dance",
    "dig",
    "dine",
    "dip",
    "dive",
    "drag",
    "draw",
    "drink",
    "drive",
    "drop",
    "dry",
    "eat",
    "fall",
    "feed",
    "fetch",
    "fight",
    "fill",
    "fish",
    "fix",
    "flip",
    "float",
    "fly",
    "fold",
    "follow",
    "frown",
    "fry",
    "gather",
    "gaze",
    "give",
    "glide",
    "grab",
    "graze",
    "greet",
    "grill",
    "grind",
    "grip",
    "groom",
    "grow",
    "hang",
    "haul",
    "help",
    "herd",
    "hike",
    "hit",
    "hold",
    "hop",
    "hug",
    "hunt",
    "jog",
    "juggle",
    "jump",
    "kick",
    "kiss",
    "kneel",
    "knit",
    "land",
    "laugh",
    "lay",
    "lead",
    "lean",
    "leap",
    "lick",
    "lie",
    "lift",
    "listen",
    "look",
    "lounge",
    "love",
    "make",
    "march",
    "mix",
    "mow",
    "munch",
    "nap",
    "nibble",
    "nod",
    "observe",
    "open",
    "operate",
    "pack",
    "paddle",
    "paint",
    "park",
    "pass",
    "pat",
    "peck",
    "pedal",
    "peel",
    "perch",
    "perform",
    "pet",
    "photograph",
    "pick",
    "pitch",
    "place",
    "plant",
    "play",
    "point",
    "poke",
    "pose",
    "pour",
    "practice",
    "prepare",
    "press",
    "pull",
    "punch",
    "push",
    "race",
    "raise",
    "reach",
    "read",
    "relax",
    "rest",
    "ride",
    "rinse",
    "roam",
    "roar",
    "roast",
    "roll",
    "row",
    "run",
    "rush",
    "sail",
    "scratch",
    "scream",
    "sell",
    "serve",
    "sew",
    "shake",
    "share",
    "shave",
    "shear",
    "shoot",
    "shop",
    "shout",
    "shovel",
    "show",
    "sing",
    "sip",
    "sit",
    "skate",
    "ski",
    "sleep",
    "slice",
    "slide",
    "smell",
    "smile",
    "smoke",
    "sniff",
    "soar",
    "speak",
    "spin",
    "splash",
    "spray",
    "spread",
    "sprint",
    "squat",
    "stack",
    "stand",
    "stare",
    "steer",
    "step",
    "stir",
    "stretch",
    "stroll",
    "strum",
    "study",
    "surf",
    "sweep",
    "swim",
    "swing",
    "tackle",
    "talk",
    "taste",
    "teach",
    "throw",
    "tie",
    "toss",
    "touch",
    "tow",
    "travel",
    "trim",
    "trot",
    "tug",
    "type",
    "use",
    "vacuum",
    "wade",
    "wait",
    "walk",
    "wash",
    "watch",
    "wave",
    "wear",
    "weld",
    "whisk",
    "work",
    "wrap",
    "write",
    "yawn",
    "yell",
];

/// Tokens that pass the verb morphology test but are (almost) always
/// nouns or adjectives in captions.
pub const NOUN_EXCEPTIONS: &[&str] = &[
    "awning",
    "awnings",
    "building",
    "buildings",
    "ceiling",
    "ceilings",
    "clothing",
    "dining",
    "dressing",
    "evening",
    "frosting",
    "icing",
    "lightning",
    "living",
    "morning",
    "railing",
    "railings",
    "siding",
    "wedding",
    "weddings",
];

use crate::narrative::Topic;

/// Content words per topic. Lists are pairwise disjoint, also after
/// lemmatization.
pub fn topic_words(topic: Topic) -> &'static [&'static str] {
    match topic {
        Topic::Parents => &["mother", "father", "mothers", "fathers", "parent", "parents", "mama", "papa", "grandmother", "uncle"],
        Topic::Captivity => &["guard", "guards", "barrack", "barracks", "fence", "wire", "prisoner", "prisoners", "cell", "locked"],
        Topic::DailyLifeChildhood => &["school", "schools", "playing", "played", "toy", "toys", "garden", "cousin", "cousins", "holiday"],
        Topic::DailyLifeImprisonment => &["soup", "bread", "ration", "rations", "bunk", "bunks", "rollcall", "blanket", "blankets", "queue"],
        Topic::FeelingsAndThoughts => &["afraid", "hope", "hoped", "hoping", "felt", "thinking", "thought", "lonely", "wondered", "dreamed"],
        Topic::ForcedLabor => &["digging", "dug", "factory", "factories", "shovel", "shovels", "quarry", "hauling", "hauled", "stones"],
        Topic::Government => &["decree", "decrees", "official", "officials", "ministry", "law", "laws", "police", "permit", "permits"],
        Topic::Health => &["sick", "fever", "doctor", "doctors", "typhus", "hospital", "hospitals", "medicine", "wound", "wounds"],
        Topic::Liberation => &["soldier", "soldiers", "tank", "tanks", "freed", "liberated", "jeep", "jeeps", "flag", "flags"],
        Topic::PostConflict => &["rebuilt", "rebuilding", "married", "wedding", "apartment", "apartments", "job", "jobs", "reunion", "newspaper"],
        Topic::RefugeeExperiences => &["ship", "ships", "border", "borders", "visa", "visas", "camp", "boat", "boats", "harbor"],
    }
}

/// Words for subject sentences without a topic.
pub const NEUTRAL_WORDS: &[&str] = &[
    "then", "there", "we", "they", "it", "very", "much", "some", "other", "still", "again", "always",
];

pub const INTERVIEWER_WORDS: &[&str] = &[
    "please", "tell", "remember", "describe", "question", "moment", "perhaps", "more", "about", "how",
];

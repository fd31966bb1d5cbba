//! Planner prompt assets. The texts are plain renderings of the published
//! task-planning prompts; the dual-source system prompt has an `{obj_1}` slot.

use crate::world::Category;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SINGLE_SYSTEM: &str = include_str!("../../assets/prompts/single_system.txt");
pub const BISONIC_SYSTEM: &str = include_str!("../../assets/prompts/bisonic_system.txt");
pub const USER: &str = include_str!("../../assets/prompts/user.txt");
pub const PROMPT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub single_system: String,
    pub bisonic_system: String,
    pub user: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            single_system: SINGLE_SYSTEM.to_string(),
            bisonic_system: BISONIC_SYSTEM.to_string(),
            user: USER.trim_end().to_string(),
        }
    }
}

/// Source name used in the dual-source prompt's hint slot.
pub fn prompt_name(category: Category) -> &'static str {
    match category {
        Category::Alarm => "Mechanical_Alarm",
        Category::Phone => "Phone",
        Category::Furby => "Furby",
        Category::Doorbell => "Doorbell",
        Category::Sink => "Running-Water",
        Category::Distractor => "Distractor",
    }
}

impl PromptSet {
    /// Reads `single_system.txt`, `bisonic_system.txt` and `user.txt` from `dir`.
    pub fn load(dir: &Path) -> std::io::Result<Self> {
        Ok(Self {
            single_system: std::fs::read_to_string(dir.join("single_system.txt"))?,
            bisonic_system: std::fs::read_to_string(dir.join("bisonic_system.txt"))?,
            user: std::fs::read_to_string(dir.join("user.txt"))?.trim_end().to_string(),
        })
    }

    /// System prompt for a single-source episode, or the dual-source prompt
    /// with the hint filled in.
    pub fn system(&self, hint: Option<Category>) -> String {
        match hint {
            None => self.single_system.clone(),
            Some(c) => self.bisonic_system.replace("{obj_1}", prompt_name(c)),
        }
    }
}

//! TOML configuration bundle. Every section and field is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{EpisodeEnv, Limits};
use crate::planner::LlmConfig;
use crate::scenegen::ObjectRoster;
use crate::skills::SkillConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub master_seed: u64,
    /// Worker threads; 0 uses the available parallelism.
    pub parallelism: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            master_seed: 42,
            parallelism: 0,
        }
    }
}

impl BenchConfig {
    pub fn workers(&self) -> usize {
        if self.parallelism > 0 {
            self.parallelism
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub skills: SkillConfig,
    pub limits: Limits,
    pub llm: LlmConfig,
    pub bench: BenchConfig,
    pub roster: Option<ObjectRoster>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.limits;
        if l.max_steps == 0 {
            return Err(Error::Config("limits.max_steps must be positive".into()));
        }
        let s = &self.skills;
        if !(s.hover_height > 0.0 && s.grasp_reach > 0.0 && s.corridor_halfwidth >= 0.0) {
            return Err(Error::Config(
                "skills.hover_height and skills.grasp_reach must be positive, corridor_halfwidth non-negative".into(),
            ));
        }
        if let Some(r) = &self.roster {
            r.validate()?;
        }
        Ok(())
    }

    pub fn roster(&self) -> ObjectRoster {
        self.roster.clone().unwrap_or_default()
    }

    pub fn episode_env(&self) -> EpisodeEnv {
        EpisodeEnv {
            roster: self.roster(),
            skills: self.skills.clone(),
            limits: self.limits,
            render_for_planner: self.llm.send_image,
        }
    }
}

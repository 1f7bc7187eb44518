use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{Arch, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generator,
    Discriminator,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Generator => "generator",
            Role::Discriminator => "discriminator",
        })
    }
}

/// Monotone id source; one per run so ids are reproducible.
#[derive(Debug, Clone, Default)]
pub struct SnapshotIds {
    next: u64,
}

impl SnapshotIds {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(next: u64) -> Self {
        Self { next }
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

/// Frozen parameters of one network: a pure strategy of the meta-game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct NetworkSnapshot<T: Scalar> {
    pub role: Role,
    pub arch: Arch,
    pub params: Vec<T>,
    pub id: u64,
}

impl<T: Scalar> Mlp<T> {
    pub fn snapshot(&self, role: Role, ids: &mut SnapshotIds) -> NetworkSnapshot<T> {
        NetworkSnapshot {
            role,
            arch: self.arch().clone(),
            params: self.params(),
            id: ids.next_id(),
        }
    }
}

impl<T: Scalar> NetworkSnapshot<T> {
    pub fn restore(&self) -> Result<Mlp<T>> {
        Mlp::from_params(self.arch.clone(), &self.params)
    }

    pub fn expect_role(&self, role: Role) -> Result<()> {
        if self.role != role {
            return Err(Error::RoleMismatch {
                expected: role.to_string(),
                actual: self.role.to_string(),
            });
        }
        Ok(())
    }

    /// `{role}-{id}.json`.
    pub fn file_name(&self) -> String {
        Self::file_name_for(self.role, self.id)
    }

    pub fn file_name_for(role: Role, id: u64) -> String {
        format!("{role}-{id}.json")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let snap: Self = serde_json::from_slice(&fs::read(path)?)?;
        if snap.params.len() != snap.arch.param_count() {
            return Err(Error::ArchMismatch(format!(
                "{} holds {} parameters, architecture needs {}",
                path.display(),
                snap.params.len(),
                snap.arch.param_count()
            )));
        }
        Ok(snap)
    }
}

use std::sync::Arc;

use super::replica::Replica;
use crate::consensus::Block;
use crate::hierarchy::ChainPath;

/// Selfish miner co-located with one honest gateway node.
///
/// Mines on its own view and withholds everything it finds. When the public
/// chain catches up with its private lead on the target chain it releases
/// all withheld blocks; when the public chain overtakes it, the withheld
/// blocks are dropped.
#[derive(Debug)]
pub struct Adversary {
    pub replica: Replica,
    pub leaf: ChainPath,
    pub target: ChainPath,
    pub gateway: u32,
    pub withheld: Vec<Arc<Block>>,
    public_height: u64,
}

impl Adversary {
    pub fn new(replica: Replica, leaf: ChainPath, target: ChainPath, gateway: u32) -> Self {
        Adversary { replica, leaf, target, gateway, withheld: Vec::new(), public_height: 0 }
    }

    fn private_height(&self) -> Option<u64> {
        let forest = self.replica.forest();
        self.withheld
            .iter()
            .filter(|b| b.is_member(&self.target) && forest.is_valid(b.id))
            .map(|b| forest.height(b.id, &self.target))
            .max()
    }

    /// Takes in an honest block; returns withheld blocks to publish now.
    pub fn observe(&mut self, block: Arc<Block>, now: f64) -> Option<Vec<Arc<Block>>> {
        let id = block.id;
        let on_target = block.is_member(&self.target);
        self.replica.receive(block, now);
        if on_target && self.replica.forest().is_valid(id) {
            self.public_height = self.public_height.max(self.replica.forest().height(id, &self.target));
        }
        if self.withheld.is_empty() {
            return None;
        }
        match self.private_height() {
            Some(h) if h > self.public_height => None,
            Some(h) if h < self.public_height => {
                self.withheld.clear();
                None
            }
            _ => Some(std::mem::take(&mut self.withheld)),
        }
    }
}

//! Persistent per-client record kept by the server.

use alloc::collections::VecDeque;

use crate::vector::ModelVector;

/// Ground-truth behaviour of a client. Known to the harness, never consulted
/// by the server-side scoring path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Benign,
    LabelFlip,
    ByzantineGradient,
    GradientScaling,
    Adaptive,
    Alie,
    StatisticalMimicry,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Benign,
        Role::LabelFlip,
        Role::ByzantineGradient,
        Role::GradientScaling,
        Role::Adaptive,
        Role::Alie,
        Role::StatisticalMimicry,
    ];

    /// The six attacking behaviours, in round-robin assignment order.
    pub const ATTACKS: [Role; 6] = [
        Role::LabelFlip,
        Role::ByzantineGradient,
        Role::GradientScaling,
        Role::Adaptive,
        Role::Alie,
        Role::StatisticalMimicry,
    ];

    pub fn is_malicious(self) -> bool {
        self != Role::Benign
    }

    /// Roles that pool their honest gradients to estimate honest statistics.
    pub fn colludes(self) -> bool {
        matches!(self, Role::Alie | Role::StatisticalMimicry)
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Benign => "benign",
            Role::LabelFlip => "label_flip",
            Role::ByzantineGradient => "byzantine",
            Role::GradientScaling => "scaling",
            Role::Adaptive => "adaptive",
            Role::Alie => "alie",
            Role::StatisticalMimicry => "sm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }
}

/// Fixed-capacity FIFO window; pushing into a full window evicts the oldest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> Window<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Self { items: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> alloc::collections::vec_deque::Iter<'_, T> {
        self.items.iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub id: usize,
    pub role: Role,
    reputation: f64,
    /// Stored evidence scores `r1, r2, r3`, each in `[0, 1]`.
    pub components: [f64; 3],
    /// Raw consistency recursion value in `[-1, 1]`; `components[0]` is its
    /// affine image in `[0, 1]`.
    pub raw_consistency: f64,
    pub update_ema: Option<ModelVector>,
    pub participation: Window<bool>,
    pub response_times: Window<f64>,
    pub n_samples: usize,
}

impl ClientState {
    pub const INITIAL_REPUTATION: f64 = 0.5;

    pub fn new(
        id: usize,
        role: Role,
        n_samples: usize,
        participation_window: usize,
        response_window: usize,
    ) -> Self {
        Self {
            id,
            role,
            reputation: Self::INITIAL_REPUTATION,
            components: [0.5; 3],
            raw_consistency: 0.0,
            update_ema: None,
            participation: Window::new(participation_window),
            response_times: Window::new(response_window),
            n_samples: n_samples.max(1),
        }
    }

    pub fn reputation(&self) -> f64 {
        self.reputation
    }

    /// Stores a reputation value, clamped to `[0, 1]`. NaN maps to 0.
    pub fn set_reputation(&mut self, value: f64) {
        self.reputation = if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) };
    }
}

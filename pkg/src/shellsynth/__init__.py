"""Grammar-driven shell input synthesis with irreducibility scoring."""

from .behavior import NoiseProfile, behaviors_differ, edit_similarity, noise_threshold
from .dataset import ShioRecord, corpus_stats, read_records, write_records
from .env import Action, EnvConfig, Session, ShellEnv, StepResult, render_session
from .estimators import GrammarSynthesizer, IrreducibilityEstimator, check_inputs
from .executor import ExecutionCache, ExecutionTrace, SandboxBackend, SimulatedBackend, execute
from .grammar import Grammar, GrammarError, load_bundled_grammar, load_grammar, parse_grammar
from .irreducibility import (
    IrreducibilityReport,
    composite_irreducibility,
    estimate_irreducibility,
    exact_irreducibility,
    mae_by_budget,
    subinput,
)
from .patch import apply_patch, diff_context
from .render import render_args
from .synthesis import rollout_option, synthesize_argument, synthesize_command

__version__ = "0.1.0"

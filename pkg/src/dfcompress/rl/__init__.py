"""Multi-step compression environment and policy search."""
from .env import (BestConfig, CompressionEnv, EnvConfig, StepRecord, SurrogateBackend,
                  TrainerBackend, compute_reward)
from .pruning import PruningComparison, geometric_schedule, multistep_vs_onestep_pruning
from .sac import RandomAgent, ReplayBuffer, SACAgent, SACConfig
from .search import Campaign, CampaignResult, random_search, sac_train

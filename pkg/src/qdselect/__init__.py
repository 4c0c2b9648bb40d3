"""Quality-diversity maze search with user-selection-constrained continuation."""

from .gp import MaternGPRegressor, matern52
from .maze import Collision, ExitTrace, MazeSpec, classify_exits, descriptor_cell, first_collision
from .projection import Embedding, ExactTSNE, ProjectionConfig, pairwise_affinities, run_tsne
from .qd import (Archive, EvolutionConfig, FitnessObjective, initialize_population,
                 mutate, run_map_elites, seed_archive)
from .selection import (DriftPenaltyObjective, PartitionError, PenaltyConfig,
                        SelectionDriftModel, SelectionPartition, build_selection_model,
                        continue_archive, embed_archive, penalized_fitness, run_udqd)
from .tasks import (ElmanTopology, EvaluatedSolution, TaskSpec, controller_task,
                    decode_planner, evaluate, evaluate_batch, planner_task,
                    simulate_controller)

__version__ = "0.1.0"

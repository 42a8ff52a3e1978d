"""
Business logic services for the simulator.
"""
from .trace_service import aggregate, normalize, make_windows, synth_workload
from .predictor_service import OmFnnPredictor, fitness, edp
from .training_service import TadeTrainer, SadeTrainer, BackpropTrainer, build_trainer
from .autoscaler_service import kmeans, elbow, map_cluster_to_vm, autoscale
from .placement_service import PlacementProblem, pareto_fronts, place_ga, place_best_fit, build_engine
from .orchestrator_service import Scenario, run_scenario, run_suite, compare_scenarios, prediction_report
from .result_formatter import ResultFormatter

__all__ = [
    'aggregate',
    'normalize',
    'make_windows',
    'synth_workload',
    'OmFnnPredictor',
    'fitness',
    'edp',
    'TadeTrainer',
    'SadeTrainer',
    'BackpropTrainer',
    'build_trainer',
    'kmeans',
    'elbow',
    'map_cluster_to_vm',
    'autoscale',
    'PlacementProblem',
    'pareto_fronts',
    'place_ga',
    'place_best_fit',
    'build_engine',
    'Scenario',
    'run_scenario',
    'run_suite',
    'compare_scenarios',
    'prediction_report',
    'ResultFormatter',
]

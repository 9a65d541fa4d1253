from .gradcheck_suite import GradCheckSuiteReport, run_suite
from .main import build_parser, main, run
from .pipeline import EnhanceResult, Enhancer, GeneratorEstimator, OracleEstimator, identity_estimator

__all__ = ['GradCheckSuiteReport', 'run_suite', 'build_parser', 'main', 'run', 'EnhanceResult', 'Enhancer',
           'GeneratorEstimator', 'OracleEstimator', 'identity_estimator']

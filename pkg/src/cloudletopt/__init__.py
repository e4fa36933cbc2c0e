# Import the main entry points provided by this package for convenience
from .model import Scenario, Solution, evaluate_cost, validate  # noqa
from .scenario import GeneratorParams, generate, read_scenario, write_scenario  # noqa

__version__ = '0.1.0'

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Load environment variables FIRST
load_dotenv()

from pydantic import ValidationError

from models import ExperimentConfig, ExperimentReport
from routers.experiments import router as experiment_router
from services.errors import BudgetExceeded, ConfigError, HypTableError, VerificationFailed
from services.report_store import report_store
from services.settings import settings

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger("hyptable")

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyptable",
        description="Multiplication-table languages of finitely generated groups",
    )
    parser.add_argument("experiment", help="Experiment to run, e.g. theorem1-check")
    parser.add_argument("--config", help="TOML file with default settings for the run")
    parser.add_argument("--group", help="Builtin group name or group definition file")
    parser.add_argument("--combing", help="geodesic | shortlex | sigma-star | acceptor file")
    parser.add_argument("--maxlen", type=int)
    parser.add_argument("--delta", type=int)
    parser.add_argument("--policy", choices=["greedy", "paper"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="Directory for reports and golden files")
    parser.add_argument("--expect-nonhyperbolic", action="store_true", default=None)
    parser.add_argument("--budget-states", type=int)
    parser.add_argument("--budget-elements", type=int)
    parser.add_argument("--letter", help="Letter for column/comparator runs ('-' for ε)")
    parser.add_argument("--element", help="Word naming the column element")
    parser.add_argument("--cycles", type=int)
    parser.add_argument("--refine", action="store_true", default=None)
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file values first, then flags"""
    values: Dict[str, Any] = {
        "seed": settings.seed,
        "out": settings.report_dir,
    }
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                values.update(tomllib.load(fh))
        except FileNotFoundError:
            raise ConfigError(f"config file {args.config} does not exist") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{args.config}: {e}") from e
        values = {k.replace("-", "_"): v for k, v in values.items()}
    for key, value in vars(args).items():
        if key != "config" and value is not None:
            values[key] = value
    return ExperimentConfig.model_validate(values)


def apply_overrides(config: ExperimentConfig):
    if config.budget_states is not None:
        settings.budget_states = config.budget_states
    if config.budget_elements is not None:
        settings.budget_elements = config.budget_elements
    settings.seed = config.seed
    settings.report_dir = config.out
    report_store.use(config.out)


def failure_report(config: ExperimentConfig, error: VerificationFailed) -> ExperimentReport:
    return ExperimentReport(
        experiment=config.experiment,
        anchor="verification",
        group=config.group,
        combing=config.combing,
        maxlen=config.maxlen,
        seed=config.seed,
        passed=False,
        results={"error": str(error)},
        counterexamples=[str(c) for c in error.counterexamples],
    )


def run(argv: Optional[List[str]] = None) -> int:
    """Run one experiment and map its outcome to an exit status"""
    args = build_parser().parse_args(argv)
    config = None
    try:
        config = load_config(args)
        apply_overrides(config)
        report = experiment_router.run(config)
    except VerificationFailed as e:
        logger.error(f"❌ {e}")
        report_store.save_report(failure_report(config, e))
        return EXIT_FAILED
    except BudgetExceeded as e:
        logger.error(f"⏳ {e}")
        return EXIT_BUDGET
    except (ConfigError, ValidationError) as e:
        logger.error(f"⚙️ Configuration error: {e}")
        return EXIT_CONFIG
    except HypTableError as e:
        logger.error(f"⚙️ {type(e).__name__}: {e}")
        return EXIT_CONFIG

    report_store.save_report(report)
    return EXIT_PASSED if report.passed else EXIT_FAILED


def main():
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    sys.exit(run())


if __name__ == "__main__":
    main()

"""
Command Registry Module.
Maps CLI subcommand names to Orchestrator pipelines using a registry pattern.
"""

import argparse
import logging
from typing import Callable, Dict, List

logger = logging.getLogger(__name__)

CommandHandler = Callable[[argparse.Namespace], bool]

# Global command registry mapping subcommand names to handlers
COMMAND_REGISTRY: Dict[str, CommandHandler] = {}


def register_command(name: str) -> Callable[[CommandHandler], CommandHandler]:
    """
    Decorator function to register a pipeline in the COMMAND_REGISTRY.

    Usage:
        @register_command("validate")
        def run_validate(args):
            return orchestrator.validate(args.input)

    Args:
        name: Subcommand name to register

    Returns:
        Decorator function that registers the handler
    """
    def decorator(func: CommandHandler) -> CommandHandler:
        if name in COMMAND_REGISTRY:
            logger.warning(f"Command '{name}' is already registered. Overwriting previous registration.")
        COMMAND_REGISTRY[name] = func
        logger.debug(f"Registered command: {name}")
        return func
    return decorator


def run_command(name: str, args: argparse.Namespace) -> bool:
    """
    Execute a registered command.

    Args:
        name: Subcommand name (must be in COMMAND_REGISTRY)
        args: Parsed command-line arguments

    Returns:
        True if the pipeline succeeded, False otherwise

    Raises:
        ValueError: If the command is not registered
    """
    if name not in COMMAND_REGISTRY:
        available = ', '.join(list_commands())
        raise ValueError(
            f"Command '{name}' not found in registry. Available commands: {available or 'none'}"
        )

    logger.info("=" * 70)
    logger.info(f"Executing command: {name}")
    logger.info("=" * 70)

    try:
        result = COMMAND_REGISTRY[name](args)
    except Exception as e:
        logger.error(f"Command '{name}' failed with exception: {str(e)}", exc_info=True)
        result = False

    if result:
        logger.info(f"Command '{name}' completed successfully")
    else:
        logger.warning(f"Command '{name}' completed with errors")
    logger.info("=" * 70)
    return result


def load_default_commands(orchestrator) -> None:
    """
    Register every Orchestrator pipeline under its subcommand name.

    Args:
        orchestrator: Orchestrator instance the handlers call into
    """
    from services.confidence import TrainConfig

    COMMAND_REGISTRY.clear()

    def _config(args: argparse.Namespace) -> TrainConfig:
        return TrainConfig(epochs=args.epochs, step_size=args.step_size, l2=args.l2, seed=args.seed)

    @register_command("validate")
    def run_validate(args: argparse.Namespace) -> bool:
        return orchestrator.validate(args.input, fmt=args.format, out=args.out)

    @register_command("analyze")
    def run_analyze(args: argparse.Namespace) -> bool:
        return orchestrator.analyze(
            args.input, bucket_by=args.bucket_by, out=args.out,
            ood_prefix=args.ood_prefix, ood_labels=args.ood_labels,
        )

    @register_command("report")
    def run_report(args: argparse.Namespace) -> bool:
        return orchestrator.report(
            args.input, kind=args.kind, bucket_by=args.bucket_by, out=args.out,
            ood_prefix=args.ood_prefix, ood_labels=args.ood_labels,
        )

    @register_command("oracle")
    def run_oracle(args: argparse.Namespace) -> bool:
        return orchestrator.oracle(args.input, args.out_dir, kinds=args.kind, fmt=args.format)

    @register_command("perturb")
    def run_perturb(args: argparse.Namespace) -> bool:
        return orchestrator.perturb(
            args.input, args.out,
            error_types=args.type,
            seed=args.seed,
            prob_profile=args.prob_profile,
            correct_fraction=args.correct_fraction,
            variant=args.variant,
            ood_prefix=args.ood_prefix,
            fmt=args.format,
        )

    @register_command("ce-train")
    def run_ce_train(args: argparse.Namespace) -> bool:
        return orchestrator.ce_train(
            args.input, args.model, config=_config(args), mask=args.features, tune_dev=args.tune_threshold,
        )

    @register_command("ce-eval")
    def run_ce_eval(args: argparse.Namespace) -> bool:
        return orchestrator.ce_eval(args.input, args.model, out=args.out)

    @register_command("ce-ablate")
    def run_ce_ablate(args: argparse.Namespace) -> bool:
        return orchestrator.ce_ablate(args.train, args.test, config=_config(args), out=args.out)

    @register_command("synth")
    def run_synth(args: argparse.Namespace) -> bool:
        return orchestrator.synth(
            args.out, n=args.n, seed=args.seed, max_depth=args.max_depth,
            ood_rate=args.ood_rate, depths=args.depths,
        )

    @register_command("stats")
    def run_stats(args: argparse.Namespace) -> bool:
        return orchestrator.stats(args.input, out=args.out, fmt=args.format)

    logger.debug(f"Loaded {len(COMMAND_REGISTRY)} commands: {', '.join(list_commands())}")


def list_commands() -> List[str]:
    """
    List all registered commands.

    Returns:
        Sorted command names
    """
    return sorted(COMMAND_REGISTRY.keys())

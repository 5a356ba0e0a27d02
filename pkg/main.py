import argparse
import importlib
import logging
import sys

from traceback import format_exception
from utils import exceptions
from utils.config import RunConfig

cogs = ["cogs.gen", "cogs.fuse", "cogs.erf", "cogs.verify", "cogs.complexity"]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_IO = 2
EXIT_SHAPE = 3
EXIT_USAGE = 4


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise exceptions.UsageError(f"{self.prog}: {message}")


class SsFuse:
    def __init__(self, description):
        self.logger = self.get_logger(self)
        self.parser = Parser(prog="ssfuse", description=description)
        self.subparsers = self.parser.add_subparsers(dest="command", metavar="command")
        self.subparsers.required = True
        self.cogs = {}
        self.load_cogs()

    @staticmethod
    def get_logger(self):
        logger = logging.getLogger(f"ssfuse.{self.__class__.__name__}")
        logger.setLevel(logging.DEBUG)
        return logger

    @staticmethod
    def setup_logging(log_file):
        root = logging.getLogger("ssfuse")
        root.setLevel(logging.DEBUG)
        for handler in list(root.handlers):
            root.removeHandler(handler)
            handler.close()
        ch = logging.StreamHandler(sys.stderr)
        ch.setLevel(logging.INFO)
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(module)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
        ch.setFormatter(formatter)
        root.addHandler(ch)
        if log_file:
            fh = logging.FileHandler(log_file)
            fh.setLevel(logging.NOTSET)
            fh.setFormatter(formatter)
            root.addHandler(fh)
        return root

    def load_cogs(self):
        for cog in cogs:
            try:
                importlib.import_module(cog).setup(self)
                self.logger.debug(f"Loaded {cog}")
            except ModuleNotFoundError:
                self.logger.error(f"Extension {cog} not found")
            except Exception as exc:
                self.logger.error(f"Error occurred when loading {cog}")
                self.logger.debug(
                    f"{''.join(format_exception(type(exc), exc, exc.__traceback__))}"
                )

    def add_cog(self, cog):
        cog.register(self.subparsers)
        self.cogs[cog.__class__.__name__] = cog

    @staticmethod
    def add_common_arguments(parser):
        parser.add_argument("--config", metavar="PATH", help="key=value or .json run config")
        parser.add_argument("--seed", type=int, help="override the configured seed")
        parser.add_argument("--out", metavar="PATH", help="output location")

    def load_config(self, args):
        if args.config is None:
            config = RunConfig()
        else:
            config = RunConfig.load(args.config)
        return config.override(seed=args.seed)

    def run(self, argv=None):
        args = None
        try:
            args = self.parser.parse_args(argv)
            config = self.load_config(args)
            self.setup_logging(config.log_file)
            self.logger.info(
                f"Running {args.command} with {args.config or 'default config'}, seed {config.seed}"
            )
            args.handler(config, args)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else EXIT_USAGE
        except Exception as exc:
            return self.on_command_error(args, exc)
        return EXIT_OK

    def on_command_error(self, args, exc):
        cog = getattr(args, "cog", None)
        logger = self.logger if cog is None else cog.logger
        command = getattr(args, "command", None) or "ssfuse"

        if isinstance(exc, exceptions.VerificationFailed):
            print(f"{command}: {exc}", file=sys.stderr)
            return EXIT_FAILED

        elif isinstance(exc, (exceptions.UsageError, exceptions.ConfigError)):
            print(f"{command}: {exc}", file=sys.stderr)
            return EXIT_USAGE

        elif isinstance(exc, exceptions.DimensionError):
            print(f"{command}: shape error: {exc}", file=sys.stderr)
            return EXIT_SHAPE

        elif isinstance(exc, (exceptions.FormatError, OSError)):
            print(f"{command}: I/O error: {exc}", file=sys.stderr)
            return EXIT_IO

        elif isinstance(exc, (exceptions.NumericError, exceptions.ParameterError)):
            print(f"{command}: {exc}", file=sys.stderr)
            logger.error(f"{type(exc).__name__} in {command}: {exc}")
            return EXIT_FAILED

        else:
            print(f"Unhandled exception in `{command}`: {exc}", file=sys.stderr)
            logger.error(f"Unhandled exception occurred in {command}")
            logger.debug(
                f"{''.join(format_exception(type(exc), exc, exc.__traceback__))}"
            )
            return EXIT_FAILED


def main(argv=None):
    app = SsFuse(
        description="Multispectral state-space fusion blocks with verification tooling"
    )
    return app.run(argv)


if __name__ == "__main__":
    sys.exit(main())

from ssfuse.verification import erf_block, erf_map
from utils.fileio import write_erf


class Erf:
    """Effective receptive field heatmaps."""

    def __init__(self, app):
        self.app = app
        self.logger = self.app.get_logger(self)

    def register(self, subparsers):
        parser = subparsers.add_parser(
            "erf", help="export the ERF of a block at the configured center as PGM and CSV"
        )
        self.app.add_common_arguments(parser)
        parser.add_argument(
            "--block",
            help="ms2fusion, ff_uni_12, ff_uni_21, ff_bidir or conv3_ref (default: erf_block)",
        )
        parser.set_defaults(handler=self.erf, cog=self)

    def erf(self, config, args):
        selector = args.block or config.erf_block
        block = erf_block(selector, config.build_weights(), config.seed)
        shape = (config.d, config.H, config.W)
        self.logger.info(f"Probing {selector} at {config.center} over {config.trials} trials")
        result = erf_map(block, shape, config.center, config.eps, config.trials, config.seed)
        pgm, table = write_erf(args.out or f"erf_{selector}", result.values.array)
        print(
            f"{selector}: support {result.support()}/{config.H * config.W} "
            f"at center {result.center}, peak {result.normalization:.6e}"
        )
        print(pgm)
        print(table)


def setup(app):
    app.add_cog(Erf(app))

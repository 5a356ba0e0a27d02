from pathlib import Path

from ssfuse.tensor import Tensor
from utils.fileio import write_sst1
from utils.utilities import synthetic_pair


class Gen:
    """Synthetic visible/thermal feature maps."""

    def __init__(self, app):
        self.app = app
        self.logger = self.app.get_logger(self)

    def register(self, subparsers):
        parser = subparsers.add_parser(
            "gen", help="write a seeded synthetic F_V/F_T pair as SST1 files"
        )
        self.app.add_common_arguments(parser)
        parser.set_defaults(handler=self.gen, cog=self)

    def targets(self, config, out):
        if out is None:
            return Path(config.f_v), Path(config.f_t)
        directory = Path(out)
        return directory / Path(config.f_v).name, directory / Path(config.f_t).name

    def gen(self, config, args):
        v, t = synthetic_pair(config.d, config.H, config.W, config.seed)
        v_path, t_path = self.targets(config, args.out)
        for path, values in ((v_path, v), (t_path, t)):
            write_sst1(path, Tensor(values))
            self.logger.info(f"Wrote {path}")
            print(path)


def setup(app):
    app.add_cog(Gen(app))

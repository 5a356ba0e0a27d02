from pathlib import Path

from ssfuse.blocks import ms2fusion
from ssfuse.layout import FeatureMap
from utils.checks import same_shape
from utils.exceptions import DimensionError
from utils.fileio import read_sst1, write_manifest, write_sst1


class Fuse:
    """Forward runs of the fusion block on SST1 feature maps."""

    def __init__(self, app):
        self.app = app
        self.logger = self.app.get_logger(self)

    def register(self, subparsers):
        parser = subparsers.add_parser("fuse", help="fuse an F_V/F_T pair into F_fused")
        self.app.add_common_arguments(parser)
        parser.add_argument(
            "--dump-intermediates",
            action="store_true",
            help="also write the CP, SP and enhancement maps next to the output",
        )
        parser.add_argument(
            "--save-weights", metavar="DIR", help="write the weights used as a manifest"
        )
        parser.set_defaults(handler=self.fuse, cog=self)

    # Internal functions
    def load_pair(self, config):
        f_v = FeatureMap(read_sst1(config.f_v))
        f_t = FeatureMap(read_sst1(config.f_t))
        if config.input_pairing == "vv":
            f_t = f_v
        elif config.input_pairing == "tt":
            f_v = f_t
        same_shape(f_v, f_t, "fusion inputs")
        expected = (config.d, config.H, config.W)
        if f_v.shape != expected:
            raise DimensionError(f"inputs have shape {f_v.shape}, config expects {expected}")
        return f_v, f_t

    def fuse(self, config, args):
        f_v, f_t = self.load_pair(config)
        weights = config.build_weights()
        if args.save_weights:
            directory = Path(args.save_weights)
            directory.mkdir(parents=True, exist_ok=True)
            manifest = write_manifest(directory, weights.named_parameters())
            self.logger.info(f"Saved weights to {manifest}")
        result = ms2fusion(f_v, f_t, weights, record=args.dump_intermediates)
        out = Path(args.out or config.out)
        write_sst1(out, result.f_fused.data)
        self.logger.info(f"Wrote {out} ({config.input_pairing} pairing)")
        print(out)
        if result.intermediates:
            for name, fmap in result.intermediates.items():
                path = out.with_name(f"{out.stem}_{name}.sst")
                write_sst1(path, fmap.data)
                self.logger.debug(f"Wrote {path}")
                print(path)


def setup(app):
    app.add_cog(Fuse(app))

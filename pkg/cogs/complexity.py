from ssfuse.complexity import METHODS, compare_methods, scaling_exponent
from utils.database import ComplexityRecord, open_ledger


class Complexity:
    """Parameter and FLOP tables for the fusion block and its references."""

    def __init__(self, app):
        self.app = app
        self.logger = self.app.get_logger(self)

    def register(self, subparsers):
        parser = subparsers.add_parser(
            "complexity", help="print params and FLOPs for ms2fusion, cnn_ref and attention_ref"
        )
        self.app.add_common_arguments(parser)
        parser.set_defaults(handler=self.complexity, cog=self)

    def complexity(self, config, args):
        reports = compare_methods(config)
        flops = {r.method_label: r.flops for r in reports}
        print(f"d={config.d} d_state={config.d_state} H={config.H} W={config.W} "
              f"scan_order={config.scan_order.value}")
        print(f"{'method':<14} {'params':>12} {'flops':>16} {'exponent':>9}")
        for report in reports:
            exponent = scaling_exponent(config, config.H, config.W, report.method_label)
            print(
                f"{report.method_label:<14} {report.params:>12} {report.flops:>16} {exponent:>9.4f}"
            )
        print(f"attention/ms2fusion flop ratio: {flops['attention_ref'] / flops['ms2fusion']:.4f}")
        if config.ledger:
            s = open_ledger(config.ledger, [ComplexityRecord])
            for report in reports:
                s.add(
                    ComplexityRecord(
                        method=report.method_label,
                        d=report.d,
                        d_state=config.d_state,
                        H=report.H,
                        W=report.W,
                        params=report.params,
                        flops=report.flops,
                    )
                )
            s.commit()
            s.close()
            self.logger.debug(f"Recorded {len(METHODS)} complexity rows")


def setup(app):
    app.add_cog(Complexity(app))

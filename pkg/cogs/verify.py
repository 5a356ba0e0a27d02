from ssfuse.verification import run_property_suite
from utils.database import CheckRecord, VerificationRun, open_ledger
from utils.exceptions import UsageError, VerificationFailed


class Verify:
    """Property suite and its results ledger."""

    def __init__(self, app):
        self.app = app
        self.logger = self.app.get_logger(self)

    def register(self, subparsers):
        parser = subparsers.add_parser("verify", help="run the property suite at config sizes")
        self.app.add_common_arguments(parser)
        parser.set_defaults(handler=self.verify, cog=self)

        parser = subparsers.add_parser("history", help="list recorded verification runs")
        self.app.add_common_arguments(parser)
        parser.add_argument("--limit", type=int, default=10, help="number of runs to show")
        parser.set_defaults(handler=self.history, cog=self)

    # Internal functions
    def record(self, config, outcomes, passed):
        s = open_ledger(config.ledger, [VerificationRun, CheckRecord])
        run = VerificationRun(
            seed=str(config.seed),
            d=config.d,
            d_state=config.d_state,
            H=config.H,
            W=config.W,
            scan_order=config.scan_order.value,
            tol=config.tol,
            passed=passed,
        )
        run.checks = [
            CheckRecord(name=o.name, passed=o.passed, measured=o.measured, limit=o.limit)
            for o in outcomes
        ]
        s.add(run)
        s.commit()
        self.logger.debug(f"Recorded {run}")
        s.close()

    def verify(self, config, args):
        outcomes = run_property_suite(config)
        for outcome in outcomes:
            print(outcome.line())
        failed = [o.name for o in outcomes if not o.passed]
        print(f"{len(outcomes) - len(failed)}/{len(outcomes)} checks passed")
        if config.ledger:
            self.record(config, outcomes, not failed)
        if failed:
            raise VerificationFailed(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        self.logger.info("All checks passed")

    def history(self, config, args):
        if not config.ledger:
            raise UsageError("history needs a ledger path in the config")
        s = open_ledger(config.ledger, [VerificationRun, CheckRecord])
        runs = (
            s.query(VerificationRun)
            .order_by(VerificationRun.id.desc())
            .limit(args.limit)
            .all()
        )
        if not runs:
            print("No verification runs recorded")
        for run in runs:
            failed = [c.name for c in run.checks if not c.passed]
            status = "PASS" if run.passed else f"FAIL ({', '.join(failed)})"
            print(
                f"#{run.id} {run.created:%Y-%m-%d %H:%M:%S} seed={run.seed} "
                f"d={run.d} d_state={run.d_state} {run.H}x{run.W} {run.scan_order} {status}"
            )
        s.close()


def setup(app):
    app.add_cog(Verify(app))

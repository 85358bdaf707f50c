from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from scenarios.exports import ExportFormat
from scenarios.serializers import load_scenario
from scenarios.services import ExitStatus, RunService, resolve_scenario
from wave_lab.exceptions import ScenarioError

TOL_RANGE = (1e-13, 1e-4)


class Command(BaseCommand):
    help = "Run a scenario: its analyses, its theorem checks and the output files."

    def add_arguments(self, parser):
        parser.add_argument('--scenario', required=True,
                            help="Path of a scenario JSON file, or the name of a bundled scenario")
        parser.add_argument('--out', help="Output directory (default: OUTPUT_DIR/<scenario name>)")
        parser.add_argument('--threads', type=int, help="Worker threads (default: WAVE_LAB['WORKERS'])")
        parser.add_argument('--tol-override', type=float, dest='tol_override',
                            help="Integration tolerance replacing the scenario's")
        parser.add_argument('--export', nargs='+', choices=ExportFormat.values, default=[],
                            help="Additional report formats")

    def handle(self, *args, **options):
        threads, tol = options['threads'], options['tol_override']
        if threads is not None and threads < 1:
            raise CommandError("--threads must be at least 1", returncode=ExitStatus.INVALID)
        if tol is not None and not TOL_RANGE[0] <= tol <= TOL_RANGE[1]:
            raise CommandError(f"--tol-override must lie in [{TOL_RANGE[0]:g}, {TOL_RANGE[1]:g}]",
                               returncode=ExitStatus.INVALID)
        try:
            scenario = load_scenario(resolve_scenario(options['scenario']))
        except ScenarioError as exc:
            raise CommandError(str(exc), returncode=ExitStatus.INVALID)
        except OSError as exc:
            raise CommandError(f"cannot read scenario: {exc}", returncode=ExitStatus.INVALID)

        out = Path(options['out']) if options['out'] else Path(settings.WAVE_LAB['OUTPUT_DIR']) / scenario['name']
        report = RunService.run(scenario, out, threads, tol, options['export'])

        for outcome in report.outcomes:
            if outcome.failed:
                self.stdout.write(self.style.ERROR(f"  {outcome.label}: error: {outcome.message}"))
                continue
            failed = [name for name, passed in sorted(outcome.checks.items()) if not passed]
            ok = len(outcome.checks) - len(failed)
            line = f"  {outcome.label} ({outcome.kind}): {ok}/{len(outcome.checks)} checks"
            self.stdout.write(self.style.WARNING(f"{line}, failed: {', '.join(failed)}") if failed else line)
        for record in report.verification:
            verdict = {True: 'pass', False: 'FAIL', None: 'exploratory'}[record['pass']]
            self.stdout.write(f"  {record['analysis']} vs {record['theorem_id']}: predicted {record.get('predicted')}, "
                              f"fitted {record.get('fitted')} -> {verdict}")

        summary = report.as_dict()['message']
        if report.exit_code != ExitStatus.PASSED:
            raise CommandError(f"{summary} (outputs in {out})", returncode=int(report.exit_code))
        self.stdout.write(self.style.SUCCESS(f"{summary} (outputs in {out})"))

from django.core.management.base import BaseCommand, CommandError

from scenarios.selftest import CHECKS, run_selftest
from scenarios.services import ExitStatus


class Command(BaseCommand):
    help = "Run the quick numerical self-checks."

    def add_arguments(self, parser):
        parser.add_argument('--only', nargs='+', choices=[name for name, _ in CHECKS], help="Run these checks only")

    def handle(self, *args, **options):
        report = run_selftest(options['only'])
        for check in report.checks:
            line = f"{check.name:<36} {check.value:.6g} ({check.wall_time:.2f}s)"
            if check.passed:
                self.stdout.write(self.style.SUCCESS(f"ok    {line}"))
            else:
                self.stdout.write(self.style.ERROR(f"FAIL  {line}"))
        if not report.passed:
            failed = [check.name for check in report.checks if not check.passed]
            raise CommandError(f"self-checks failed: {', '.join(failed)}", returncode=ExitStatus.VERIFICATION_FAILED)
        self.stdout.write(self.style.SUCCESS(f"{len(report.checks)} self-checks passed"))

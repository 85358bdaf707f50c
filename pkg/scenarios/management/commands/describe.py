from django.core.management.base import BaseCommand, CommandError

from rates.theorems import TheoremId, get_theorem, theorem_catalog
from scenarios.services import ExitStatus, theorem_matrix


class Command(BaseCommand):
    help = "Describe a theorem check, or print the theorem-to-scenario matrix."

    def add_arguments(self, parser):
        parser.add_argument('theorem_id', nargs='?', help="Theorem id; omit for the full matrix")

    def handle(self, *args, **options):
        matrix = theorem_matrix()
        theorem_id = options['theorem_id']
        if theorem_id is None:
            for theorem in theorem_catalog().values():
                scenarios = ', '.join(matrix[str(theorem.id)]) or '-'
                self.stdout.write(f"{theorem.id:<22} {theorem.title:<46} {scenarios}")
            return

        if theorem_id not in TheoremId.values:
            raise CommandError(f"unknown theorem id '{theorem_id}' (known: {', '.join(TheoremId.values)})",
                               returncode=ExitStatus.INVALID)
        theorem = get_theorem(theorem_id)
        self.stdout.write(self.style.MIGRATE_HEADING(f"{theorem.id}: {theorem.title}"))
        self.stdout.write(theorem.statement)
        self.stdout.write("Hypotheses:")
        for hypothesis in theorem.hypotheses:
            self.stdout.write(f"  - {hypothesis}")
        self.stdout.write(f"Checked quantity: {theorem.checked_quantity}")
        self.stdout.write(f"Clock: {theorem.clock}")
        self.stdout.write(f"Admissible exponents: {theorem.admissibility.label}")
        self.stdout.write(f"Dimensions: {', '.join(str(n) for n in theorem.dimensions)}")
        self.stdout.write(f"Bundled scenarios: {', '.join(matrix[theorem_id]) or '-'}")

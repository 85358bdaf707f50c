from django.core.management.base import BaseCommand

from scenarios.services import catalog
from wave_lab.exceptions import ScenarioError


class Command(BaseCommand):
    help = "List the bundled scenarios with the criteria and theorems they check."

    def handle(self, *args, **options):
        entries = catalog()
        for name, scenario in entries:
            if isinstance(scenario, ScenarioError):
                self.stdout.write(self.style.ERROR(f"{name}: invalid ({scenario})"))
                continue
            theorems = sorted({str(record['theorem_id']) for record in scenario['verify']
                               if record['theorem_id'] is not None})
            criteria = ','.join(str(item) for item in scenario['criteria']) or '-'
            self.stdout.write(f"{name:<28} criteria {criteria:<8} checks {', '.join(theorems) or '-'}")
            if scenario['description']:
                self.stdout.write(f"    {scenario['description']}")
        self.stdout.write(self.style.SUCCESS(f"{len(entries)} scenarios"))

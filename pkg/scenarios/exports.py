import json
import logging
from pathlib import Path

from django.db import models
from openpyxl import Workbook
from reportlab.lib import colors
from reportlab.lib.pagesizes import landscape, letter
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from .utils import jsonable

logger = logging.getLogger(__name__)


class ExportFormat(models.TextChoices):
    XLSX = 'xlsx', 'Excel workbook'
    PDF = 'pdf', 'PDF summary'


VERIFICATION_COLUMNS = ['analysis', 'theorem_id', 'kind', 'predicted', 'fitted', 'r2', 'tolerance', 'pass']


def _cell(value):
    value = jsonable(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return value


class ExportService:
    @classmethod
    def export_report(cls, report, format, out):
        """Write report.<format> next to report.json and return its path."""
        format = ExportFormat(format)
        path = Path(out) / f'report.{format.value}'
        if format == ExportFormat.XLSX:
            cls._export_to_excel(report).save(path)
        else:
            cls._export_to_pdf(report, path).build(cls._pdf_elements(report))
        logger.info("exported %s", path)
        return path

    @staticmethod
    def _summary(report):
        data = report['data']
        return {
            'scenario': data['scenario'],
            'status': report['status'],
            'message': report['message'],
            'exit_code': data['exit_code'],
            'schema_version': data['schema_version'],
            'criteria': ', '.join(str(item) for item in data['criteria']),
            **{f'counter: {name}': value for name, value in sorted(data['counters'].items())},
        }

    @classmethod
    def _export_to_excel(cls, report):
        wb = Workbook()
        ws = wb.active
        ws.title = "Summary"
        ws.append(['Metric', 'Value'])
        for metric, value in cls._summary(report).items():
            ws.append([metric, _cell(value)])

        data = report['data']
        ws = wb.create_sheet("Verification")
        ws.append(VERIFICATION_COLUMNS)
        for record in data['verification']:
            ws.append([_cell(record.get(column)) for column in VERIFICATION_COLUMNS])

        ws = wb.create_sheet("Checks")
        ws.append(['analysis', 'check', 'pass'])
        for check in data['checks']:
            ws.append([check['analysis'], check['check'], check['pass']])

        ws = wb.create_sheet("Analyses")
        ws.append(['label', 'kind', 'status', 'message', 'files'])
        for label, entry in sorted(data['analyses'].items()):
            ws.append([label, entry['data']['kind'], entry['status'], entry['message'],
                       ', '.join(entry['data']['files'])])
        return wb

    @staticmethod
    def _export_to_pdf(report, path):
        return SimpleDocTemplate(str(path), pagesize=landscape(letter), title=f"{report['data']['scenario']} run")

    @classmethod
    def _pdf_elements(cls, report):
        styles = getSampleStyleSheet()
        elements = [Paragraph(f"Scenario {report['data']['scenario']}", styles['Title'])]

        summary_data = [['Metric', 'Value']]
        for metric, value in cls._summary(report).items():
            summary_data.append([metric, str(_cell(value))])
        elements.append(cls._table(summary_data))

        records = report['data']['verification']
        if records:
            elements.append(Spacer(1, 18))
            elements.append(Paragraph("Verification", styles['Heading2']))
            rows = [VERIFICATION_COLUMNS]
            for record in records:
                rows.append([_format(record.get(column)) for column in VERIFICATION_COLUMNS])
            elements.append(cls._table(rows))
        return elements

    @staticmethod
    def _table(rows):
        table = Table(rows)
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), colors.grey),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
            ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, 0), 11),
            ('BOTTOMPADDING', (0, 0), (-1, 0), 8),
            ('BACKGROUND', (0, 1), (-1, -1), colors.beige),
            ('FONTNAME', (0, 1), (-1, -1), 'Helvetica'),
            ('FONTSIZE', (0, 1), (-1, -1), 9),
            ('GRID', (0, 0), (-1, -1), 1, colors.black),
        ]))
        return table


def _format(value):
    if isinstance(value, float):
        return f'{value:.4g}'
    return '' if value is None else str(_cell(value))


PLOT_SCRIPT = '''"""Plots the traces of this run directory. Needs pandas and matplotlib."""
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

HERE = Path(__file__).resolve().parent
TRACES = {traces!r}
SCANS = {scans!r}


def main():
    for name in TRACES:
        frame = pd.read_csv(HERE / name)
        positive = frame[(frame['t'] > 0) & (frame['value'] > 0)]
        fig, ax = plt.subplots()
        ax.loglog(positive['t'], positive['value'])
        ax.set_xlabel('t')
        ax.set_title(name)
        fig.savefig(HERE / name.replace('.csv', '.png'), dpi=120)
        plt.close(fig)
    for name in SCANS:
        frame = pd.read_csv(HERE / name)
        fig, ax = plt.subplots()
        ax.plot(frame['lambda'], frame['discriminant'])
        ax.axhline(2.0, color='grey', linewidth=0.5)
        ax.axhline(-2.0, color='grey', linewidth=0.5)
        ax.set_xlabel('lambda')
        ax.set_title(name)
        fig.savefig(HERE / name.replace('.csv', '.png'), dpi=120)
        plt.close(fig)


if __name__ == '__main__':
    main()
'''


def write_plot_script(out, files):
    traces = sorted(name for name in files if name.startswith('trace_'))
    scans = sorted(name for name in files if name.startswith('scan_'))
    path = Path(out) / 'plot_traces.py'
    path.write_text(PLOT_SCRIPT.format(traces=traces, scans=scans), encoding='utf-8')
    return path

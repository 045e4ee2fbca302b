"""
Servicio para exportar reportes de VCA y de reproducibilidad a Excel.
"""
import logging
from io import BytesIO
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from reprolmm.models.results import GlrtResult, VcaReport
from reprolmm.services.dataset_service import atomic_write

logger = logging.getLogger(__name__)


class ExcelService:
    """Genera libros .xlsx con encabezado estilizado y hoja de metadatos."""

    VCA_COLUMNS = [
        ('Componente', 28),
        ('Varianza', 16),
        ('Porcentaje', 14),
    ]

    GLRT_COLUMNS = [
        ('Sección', 34),
        ('Estadístico', 14),
        ('df', 8),
        ('p-valor', 14),
        ('Razón lambda', 14),
        ('Tamaño de efecto', 16),
        ('Convergió', 12),
        ('Medias por sistema', 40),
    ]

    COLOR_HEADER = 'FF1F4E78'
    COLOR_ALT_ROW = 'FFE7E6E6'

    def __init__(self):
        """Inicializa el servicio."""
        self.logger = logger

    def export_vca(self, report: VcaReport, path: Union[str, Path, None] = None) -> BytesIO:
        """
        Exporta un VcaReport (componente, varianza, porcentaje) más phi.

        Args:
            report: Reporte VCA
            path: Archivo destino (opcional)

        Returns:
            BytesIO con el libro
        """
        wb = Workbook()
        ws = wb.active
        ws.title = "Componentes de varianza"
        self._write_vca_sheet(ws, report)
        self._add_metadata(wb, [
            ('Objeto de interés:', report.object_of_interest),
            ('phi:', report.phi),
            ('Interpretación:', report.interpretation),
            ('Veredicto:', report.verdict or ''),
            ('Huella del dataset:', report.fingerprint),
        ])
        return self._save(wb, path, "VCA")

    def export_report(self, report, path: Union[str, Path, None] = None) -> BytesIO:
        """
        Exporta un ReproReport: hoja de pruebas, hoja VCA, una hoja por rejilla
        de interacción y metadatos.
        """
        wb = Workbook()
        ws = wb.active
        ws.title = "Pruebas"
        sections: List[Tuple[str, GlrtResult]] = [
            ('Mejor configuración', report.pairwise_best),
            ('Bajo variación de meta-parámetros', report.under_variation),
        ]
        sections += [(f"Condicional: {c.covariate}", c.glrt) for c in report.conditional]
        self._setup_headers(ws, self.GLRT_COLUMNS)
        for idx, (name, result) in enumerate(sections, start=2):
            means = '; '.join(f"{k}={v:.6g}" for k, v in result.means.items())
            values = [name, result.stat, result.df, result.p_value, result.lambda_ratio,
                      result.effect_size, 'Sí' if result.converged else 'No', means]
            for col, value in enumerate(values, start=1):
                ws.cell(row=idx, column=col, value=value)
        self._apply_formatting(ws, len(sections), len(self.GLRT_COLUMNS))

        if report.vca is not None:
            self._write_vca_sheet(wb.create_sheet("Componentes de varianza"), report.vca)

        for section in report.conditional:
            if section.grid is None:
                continue
            ws_grid = wb.create_sheet(f"Rejilla {section.covariate}"[:31])
            columns = [(section.covariate, 18), ('Nivel', 18), ('Predicción', 16)]
            self._setup_headers(ws_grid, columns)
            rows = list(section.grid.rows())
            for idx, (x, level, y) in enumerate(rows, start=2):
                ws_grid.cell(row=idx, column=1, value=x)
                ws_grid.cell(row=idx, column=2, value=level)
                ws_grid.cell(row=idx, column=3, value=y)
            self._apply_formatting(ws_grid, len(rows), len(columns))

        selected = '; '.join(
            f"{system}: " + ', '.join(f"{k}={v}" for k, v in cells.items())
            for system, cells in report.selected_configurations.items()
        )
        self._add_metadata(wb, [
            ('Factor de sistemas:', report.config.system),
            ('Factores de configuración:', ', '.join(report.config.config_factors)),
            ('Mejores configuraciones:', selected),
            ('Huella del dataset:', report.fingerprint),
        ])
        return self._save(wb, path, "reporte")

    def _write_vca_sheet(self, ws, report: VcaReport):
        self._setup_headers(ws, self.VCA_COLUMNS)
        for idx, comp in enumerate(report.components, start=2):
            ws.cell(row=idx, column=1, value=comp.name)
            ws.cell(row=idx, column=2, value=comp.variance)
            cell = ws.cell(row=idx, column=3, value=comp.percent)
            cell.number_format = '0.0'
        last = len(report.components) + 2
        ws.cell(row=last, column=1, value='phi').font = Font(bold=True)
        ws.cell(row=last, column=2, value=report.phi)
        ws.cell(row=last, column=3, value=report.interpretation)
        self._apply_formatting(ws, len(report.components), len(self.VCA_COLUMNS))

    def _setup_headers(self, ws, columns: Sequence[Tuple[str, int]]):
        """Configura los encabezados de las columnas."""
        header_font = Font(bold=True, color='FFFFFF', size=11)
        header_fill = PatternFill(start_color=self.COLOR_HEADER,
                                  end_color=self.COLOR_HEADER,
                                  fill_type='solid')
        header_alignment = Alignment(horizontal='center', vertical='center', wrap_text=True)
        for col, (name, width) in enumerate(columns, start=1):
            cell = ws.cell(row=1, column=col, value=name)
            cell.font = header_font
            cell.fill = header_fill
            cell.alignment = header_alignment
            ws.column_dimensions[get_column_letter(col)].width = width
        ws.freeze_panes = 'A2'

    def _apply_formatting(self, ws, num_rows: int, num_cols: int):
        """Bordes y filas alternas."""
        thin_border = Border(
            left=Side(style='thin'),
            right=Side(style='thin'),
            top=Side(style='thin'),
            bottom=Side(style='thin')
        )
        for row_idx in range(2, num_rows + 2):
            if row_idx % 2 == 0:
                fill = PatternFill(start_color=self.COLOR_ALT_ROW,
                                   end_color=self.COLOR_ALT_ROW,
                                   fill_type='solid')
            else:
                fill = PatternFill()
            for col in range(1, num_cols + 1):
                cell = ws.cell(row=row_idx, column=col)
                cell.border = thin_border
                cell.fill = fill

    def _add_metadata(self, wb, items: List[Tuple[str, object]]):
        """Agrega una hoja con metadatos del reporte (sin fecha: salida determinista)."""
        ws_meta = wb.create_sheet("Información del Reporte")
        metadata = [('Sistema:', 'Analizador de reproducibilidad (reprolmm)'), ('Versión:', '1.0')]
        metadata += items
        for idx, (label, value) in enumerate(metadata, start=1):
            ws_meta[f'A{idx}'] = label
            ws_meta[f'B{idx}'] = value
            ws_meta[f'A{idx}'].font = Font(bold=True)
        ws_meta.column_dimensions['A'].width = 28
        ws_meta.column_dimensions['B'].width = 70

    def _save(self, wb, path: Optional[Union[str, Path]], label: str) -> BytesIO:
        output = BytesIO()
        wb.save(output)
        output.seek(0)
        if path is not None:
            atomic_write(path, output.getvalue())
            self.logger.info(f"Excel de {label} escrito en {path}")
        return output

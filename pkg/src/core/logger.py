import logging
import os
import json
import traceback
from contextlib import contextmanager
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path

import numpy as np

RUTA_CONFIG_DEFAULT = Path(__file__).resolve().parents[2] / 'config' / 'logging_config.json'

CONFIG_DEFAULT = {
    'log_dir': 'logs',
    'max_bytes': 10485760,
    'backup_count': 5,
    'default_level': 'INFO',
    'format': '%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s',
    'date_format': '%Y-%m-%d %H:%M:%S',
}


def _a_json(valor):
    """Convierte escalares y arreglos de numpy para el contexto de los mensajes"""
    if isinstance(valor, np.generic):
        return valor.item()
    if isinstance(valor, np.ndarray):
        return valor.tolist() if valor.size <= 8 else f"ndarray{valor.shape}"
    return str(valor)


class MonitorNumerico:
    """
    Cuenta avisos y errores y clasifica las incidencias numéricas

    Las categorías se declaran en `alerts.categorias` como {categoria: [patrones]};
    un mensaje de nivel WARNING o superior que contenga un patrón genera una alerta.
    """

    def __init__(self, config):
        alertas = config.get('alerts', {})
        self.enabled = alertas.get('enabled', False)
        self.categorias = alertas.get('categorias', {})
        self.notification_methods = alertas.get('notification_methods', [])
        self.ruta_alertas = os.path.join(config.get('log_dir', 'logs'), 'alerts.log')
        self.stats = {
            'error_count': 0,
            'warning_count': 0,
            'critical_count': 0,
            'alert_count': 0,
            'incidencias': {c: 0 for c in self.categorias},
            'last_error': None,
            'last_critical': None
        }

    def check_message(self, level, message, contexto=None):
        """Actualiza contadores y dispara alertas por categoría"""
        self.stats[f'{level.lower()}_count'] += 1
        if level in ('ERROR', 'CRITICAL'):
            self.stats[f'last_{level.lower()}'] = {
                'timestamp': datetime.now().isoformat(),
                'message': message,
                'contexto': contexto or {}
            }

        if not self.enabled:
            return
        texto = message.lower()
        for categoria, patrones in self.categorias.items():
            if any(p.lower() in texto for p in patrones):
                self.stats['incidencias'][categoria] += 1
                self._send_alert(level, categoria, message, contexto)

    def _send_alert(self, level, categoria, message, contexto):
        self.stats['alert_count'] += 1
        linea = f"ALERTA {level} [{categoria}]: {message.splitlines()[0]}"
        if contexto:
            linea = f"{linea} - Contexto: {json.dumps(contexto, default=_a_json)}"

        for method in self.notification_methods:
            if method == 'console':
                print(linea)
            elif method == 'file':
                with open(self.ruta_alertas, 'a', encoding='utf-8') as f:
                    f.write(f"{datetime.now().isoformat()} - {linea}\n")


class Logger:
    """Logger por componente con contexto de ejecución e incidencias numéricas"""

    def __init__(self, nombre, config_file=None):
        self.nombre = nombre
        self.config = self._load_config(config_file)
        self.monitor = MonitorNumerico(self.config)
        self._contexto = {}

        os.makedirs(self.config['log_dir'], exist_ok=True)

        self.logger = logging.getLogger(f"flowrecon.{nombre}")
        self.logger.setLevel(self._nivel(self.config.get('loggers', {}).get(nombre, {}).get('level'),
                                         self.config['default_level']))
        self.logger.propagate = False
        for handler in list(self.logger.handlers):
            handler.close()
        self.logger.handlers = []

        self.log_file = None
        self._setup_handlers()

    @staticmethod
    def _load_config(config_file):
        """Mezcla la configuración del archivo sobre los valores por defecto"""
        if config_file is None:
            config_file = os.environ.get('FLOWRECON_LOG_CONFIG', RUTA_CONFIG_DEFAULT)

        config = dict(CONFIG_DEFAULT)
        if os.path.exists(config_file):
            try:
                with open(config_file, 'r', encoding='utf-8') as f:
                    config.update(json.load(f))
            except Exception as e:
                print(f"Error cargando configuración de logs {config_file}: {str(e)}")
        return config

    @staticmethod
    def _nivel(nivel, por_defecto='INFO'):
        return getattr(logging, str(nivel or por_defecto).upper())

    def _setup_handlers(self):
        handlers = self.config.get('handlers', {})
        formato = logging.Formatter(self.config['format'], datefmt=self.config['date_format'])

        archivo = handlers.get('file', {})
        if archivo.get('enabled', True):
            fecha = datetime.now().strftime("%Y%m%d_%H%M")
            self.log_file = os.path.join(self.config['log_dir'], f"{self.nombre}_{fecha}.log")
            fh = RotatingFileHandler(self.log_file, maxBytes=self.config['max_bytes'],
                                     backupCount=self.config['backup_count'], encoding='utf-8')
            fh.setLevel(self._nivel(archivo.get('level'), 'DEBUG'))
            fh.setFormatter(formato)
            self.logger.addHandler(fh)

        consola = handlers.get('console', {})
        if consola.get('enabled', True):
            ch = logging.StreamHandler()
            ch.setLevel(self._nivel(consola.get('level')))
            ch.setFormatter(formato)
            self.logger.addHandler(ch)

    def set_level(self, level):
        """Cambia el nivel del logger y de sus handlers"""
        nivel = self._nivel(level)
        self.logger.setLevel(nivel)
        for handler in self.logger.handlers:
            handler.setLevel(nivel)

    @contextmanager
    def contexto(self, **campos):
        """
        Asocia campos (celda, método, M, semilla...) a todos los mensajes del bloque

        Los bloques se pueden anidar; al salir se restaura el contexto anterior.
        """
        anterior = self._contexto
        self._contexto = {**anterior, **campos}
        try:
            yield self
        finally:
            self._contexto = anterior

    def info(self, msg, extra=None):
        self._log('info', msg, extra)

    def debug(self, msg, extra=None):
        self._log('debug', msg, extra)

    def warning(self, msg, extra=None):
        self._log('warning', msg, extra)

    def error(self, msg, extra=None, exc_info=None):
        """Log a nivel ERROR; `exc_info` añade la traza de la excepción"""
        if exc_info:
            msg = f"{msg}\n{self._format_exception(exc_info)}"
        self._log('error', msg, extra)

    def critical(self, msg, extra=None, exc_info=None):
        if exc_info:
            msg = f"{msg}\n{self._format_exception(exc_info)}"
        self._log('critical', msg, extra)

    def exception(self, msg, extra=None):
        self.error(msg, extra, exc_info=True)

    def metricas(self, etapa, valores):
        """Registra un diccionario de métricas con precisión compacta"""
        texto = ', '.join(f"{k}={v:.6g}" if isinstance(v, (float, np.floating)) else f"{k}={v}"
                          for k, v in valores.items())
        self._log('info', f"{etapa}: {texto}", None)

    def _log(self, level, msg, extra=None):
        contexto = {**self._contexto, **(extra or {})}
        if contexto:
            msg = f"{msg} - Contexto: {json.dumps(contexto, default=_a_json)}"
        getattr(self.logger, level)(msg)
        if level in ('warning', 'error', 'critical'):
            self.monitor.check_message(level.upper(), msg, contexto)

    @staticmethod
    def _format_exception(exc_info):
        if isinstance(exc_info, BaseException):
            return ''.join(traceback.format_exception(type(exc_info), exc_info, exc_info.__traceback__))
        if isinstance(exc_info, tuple):
            return ''.join(traceback.format_exception(*exc_info))
        return traceback.format_exc()

    def get_stats(self):
        return self.monitor.stats


def configurar_logging(nivel: str = 'INFO') -> None:
    """
    Configura el logger raíz del paquete `src` para la línea de comandos

    Args:
        nivel: Nivel mínimo (DEBUG, INFO, WARNING, ...)
    """
    raiz = logging.getLogger('src')
    raiz.setLevel(getattr(logging, nivel.upper()))
    if not raiz.handlers:
        ch = logging.StreamHandler()
        ch.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
        raiz.addHandler(ch)

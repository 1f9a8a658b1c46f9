import configparser
import logging
import os
from pathlib import Path

import numpy as np
from platformdirs import user_config_dir

from common.gaussianmodel import ModelParams

logger = logging.getLogger(__name__)

APP_NAME = "qngwitness"


class ConfigError(ValueError):
	pass


def default_config_path():
	return Path(user_config_dir(APP_NAME, APP_NAME)) / f"{APP_NAME}.ini"


class IniConfig:

	def __init__(self, configfilepath=None):

		self.defaults = {
			'Model': {
				'vx': '0.364',
				'vp': '0.705',
				't': '0.923',
				'eta': '0.08',
				'etah': '0.80',
				'nth': '0.0',
				'q': '0.625',
				},
			'Simulation': {'k': '40', 'm': '200', 'seed': '7'},
			'Estimation': {
				'sgrid': '0:0.05:0.4',
				'arange': '-5:0.999',
				'bins': '0.1:-6:6',
				'nmax': '20',
				'maxiter': '5000',
				'tol': '1e-10',
				},
			'Fit': {
				'restarts': '20',
				'seed': '1',
				'maxiter': '4000',
				'vx': '0.05:0.5',
				'vp': '0.5:5',
				'q': '0:1',
				'nth': '0:0.5',
				},
			'Logger': {
				'level': 'info',
				'console': '1',
				'file': '',
				},
		}
		# keys accepted in files without being defaults
		self.extra_keys = {'Model': ('r',)}

		self.config = configparser.ConfigParser()
		self.explicit = set()

		if configfilepath is None:
			configfilepath = default_config_path()
			if not os.path.exists(configfilepath):
				configfilepath = None
		elif not os.path.exists(configfilepath):
			raise FileNotFoundError(f"Config file not found: {configfilepath}")
		self.configfilepath = configfilepath

		if configfilepath is not None:
			logger.debug(f"Using config file at: {configfilepath}")
			with open(configfilepath, 'r', encoding='utf-8') as f:
				self._load(f.read())

		# Add any missing default options
		for section, defaults in self.defaults.items():
			if not self.config.has_section(section):
				self.config.add_section(section)
			for key, value in defaults.items():
				if not self.config.has_option(section, key):
					self.config.set(section, key, value)

	def _load(self, text):
		try:
			self.config.read_string(text)
		except configparser.MissingSectionHeaderError:
			self._load_flat(text)
		except configparser.Error as e:
			raise ConfigError(f"{self.configfilepath}: {e}")
		for section in self.config.sections():
			for key in self.config.options(section):
				self.explicit.add((section, key))

	def _load_flat(self, text):
		"""Sectionless 'key = value' files: each key goes to the first section declaring it."""
		flat = configparser.ConfigParser()
		try:
			flat.read_string("[flat]\n" + text)
		except configparser.Error as e:
			raise ConfigError(f"{self.configfilepath}: {e}")
		for key, value in flat.items('flat'):
			section = self._section_of(key)
			if section is None:
				raise ConfigError(f"{self.configfilepath}: unknown key '{key}'")
			if not self.config.has_section(section):
				self.config.add_section(section)
			self.config.set(section, key, value)

	def _section_of(self, key):
		for section, defaults in self.defaults.items():
			if key in defaults or key in self.extra_keys.get(section, ()):
				return section
		return None

	def save(self, configfilepath=None):
		path = configfilepath or self.configfilepath or default_config_path()
		os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
		with open(path, 'w', encoding='utf-8') as configfile:
			self.config.write(configfile)
		self.configfilepath = path

	def set(self, section, key, value):
		self.config.set(section, key.lower(), str(value))
		self.explicit.add((section, key.lower()))

	def as_dict(self):
		return {section: dict(self.config.items(section)) for section in self.config.sections()}

	# -------------------------------------------------------------------
	# Typed accessors
	# -------------------------------------------------------------------

	def getfloat(self, section, key):
		try:
			return self.config.getfloat(section, key)
		except ValueError:
			raise ConfigError(f"[{section}] {key} = '{self.config.get(section, key)}' is not a number")

	def getint(self, section, key):
		try:
			return self.config.getint(section, key)
		except ValueError:
			raise ConfigError(f"[{section}] {key} = '{self.config.get(section, key)}' is not an integer")

	def model_params(self):
		values = {name: self.getfloat('Model', key) for name, key in
				(('Vx', 'vx'), ('Vp', 'vp'), ('eta', 'eta'), ('etaH', 'etah'), ('nth', 'nth'), ('Q', 'q'))}
		if self.config.has_option('Model', 'r'):
			values['T'] = 1.0 - self.getfloat('Model', 'r')
		else:
			values['T'] = self.getfloat('Model', 't')
		return ModelParams(**values).validate()

	def simulation(self):
		return self.getint('Simulation', 'k'), self.getint('Simulation', 'm'), self.getint('Simulation', 'seed')

	def s_grid(self):
		return self.parse_range(self.config.get('Estimation', 'sgrid'))

	def a_range(self):
		lo, hi = self._split(self.config.get('Estimation', 'arange'), 2, 'Estimation', 'arange')
		if not lo < hi < 1.0:
			raise ConfigError(f"[Estimation] arange must satisfy lo < hi < 1, got {lo}:{hi}")
		return lo, hi

	def binning(self):
		return self._split(self.config.get('Estimation', 'bins'), 3, 'Estimation', 'bins')

	def fit_spec_bounds(self):
		bounds = {}
		for name, key in (('Vx', 'vx'), ('Vp', 'vp'), ('Q', 'q'), ('nth', 'nth')):
			lo, hi = self._split(self.config.get('Fit', key), 2, 'Fit', key)
			if lo > hi:
				raise ConfigError(f"[Fit] {key} bounds are reversed: {lo}:{hi}")
			bounds[name] = (lo, hi)
		return bounds

	@staticmethod
	def _split(text, count, section='', key=''):
		parts = [p.strip() for p in str(text).split(':')]
		if len(parts) != count:
			raise ConfigError(f"[{section}] {key} = '{text}' needs {count} ':'-separated values")
		try:
			return tuple(float(p) for p in parts)
		except ValueError:
			raise ConfigError(f"[{section}] {key} = '{text}' is not numeric")

	@staticmethod
	def parse_range(text):
		"""'lo:step:hi' (inclusive) or a single value; grid points are rounded to 12 decimals."""
		parts = [p.strip() for p in str(text).split(':')]
		try:
			values = [float(p) for p in parts]
		except ValueError:
			raise ConfigError(f"Range '{text}' is not numeric")
		if len(values) == 1:
			return np.array(values)
		if len(values) != 3:
			raise ConfigError(f"Range '{text}' must be 'lo:step:hi' or a single value")
		lo, step, hi = values
		if step <= 0 or hi < lo:
			raise ConfigError(f"Range '{text}' needs step > 0 and hi >= lo")
		count = int(round((hi - lo) / step)) + 1
		return np.round(lo + step * np.arange(count), 12) + 0.0

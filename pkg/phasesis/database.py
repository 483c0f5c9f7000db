#  Copyright 2026 The phasesis authors
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.
"""Declarative SQLite tables used to store sweep results next to their CSV output."""

import inspect
from collections import OrderedDict


class SchemaError(Exception):
    pass


class SQLType:
    python = None
    sql = None

    def __eq__(self, other):
        return isinstance(other, self.__class__)

    def to_sql(self):
        return self.sql

    def accepts(self, value):
        return value is None or isinstance(value, self.python)


class Integer(SQLType):
    python = int
    sql = "INTEGER"


class Real(SQLType):
    python = (float, int)
    sql = "REAL"


class Text(SQLType):
    python = str
    sql = "TEXT"


class Column:
    __slots__ = ('column_type', 'name', 'primary_key', 'nullable', 'index', 'index_name', 'unique')

    def __init__(self, column_type, name=None, *, primary_key=False, nullable=True, index=False, unique=False):
        if inspect.isclass(column_type):
            column_type = column_type()
        if not isinstance(column_type, SQLType):
            raise TypeError('Cannot have a non-SQLType derived column_type')
        if primary_key and unique:
            raise SchemaError("'unique' and 'primary_key' are mutually exclusive.")
        self.column_type = column_type
        self.name = name
        self.primary_key = primary_key
        self.nullable = nullable and not primary_key
        self.index = index
        self.index_name = None
        self.unique = unique

    def definition(self):
        """The column's fragment of a ``CREATE TABLE`` statement."""
        builder = [self.name, self.column_type.to_sql()]
        if self.unique:
            builder.append('UNIQUE')
        if not self.nullable:
            builder.append('NOT NULL')
        return ' '.join(builder)


class TableMeta(type):
    @classmethod
    def __prepare__(mcs, name, bases, **kwargs):
        return OrderedDict()

    def __new__(mcs, name, parents, dct, **kwargs):
        table_name = kwargs.get('table_name', name.lower())
        dct['__tablename__'] = table_name
        columns = []
        for attr, value in dct.items():
            if isinstance(value, Column):
                if value.name is None:
                    value.name = attr
                if value.index:
                    value.index_name = f'{table_name}_{value.name}_idx'
                columns.append(value)
        dct['columns'] = columns
        return super().__new__(mcs, name, parents, dct)

    def __init__(cls, name, parents, dct, **kwargs):
        super().__init__(name, parents, dct)


class Table(metaclass=TableMeta):
    __tablename__ = None

    @classmethod
    def create_table(cls, *, exists_ok=True):
        """Generates the CREATE TABLE and CREATE INDEX statements."""
        head = 'CREATE TABLE IF NOT EXISTS' if exists_ok else 'CREATE TABLE'
        definitions = [c.definition() for c in cls.columns]
        primary_keys = [c.name for c in cls.columns if c.primary_key]
        if primary_keys:
            definitions.append(f'PRIMARY KEY ({", ".join(primary_keys)})')
        statements = [f'{head} {cls.__tablename__} ({", ".join(definitions)});']
        for column in cls.columns:
            if column.index:
                statements.append(f'CREATE INDEX IF NOT EXISTS {column.index_name} '
                                  f'ON {cls.__tablename__} ({column.name});')
        return '\n'.join(statements)

    @classmethod
    def all_tables(cls):
        return cls.__subclasses__()

    @classmethod
    def insert(cls, c, **kwargs):
        """Inserts a row, checking every value against its column type."""
        verified = {}
        for column in cls.columns:
            if column.name not in kwargs:
                continue
            value = kwargs[column.name]
            if value is None and not column.nullable:
                raise TypeError(f'Cannot pass None to non-nullable column {column.name}.')
            if not column.column_type.accepts(value):
                raise TypeError(f'column {column.name} expected {column.column_type.to_sql()}, '
                                f'received {value.__class__.__name__}')
            verified[column.name] = value
        sql = 'INSERT INTO {0} ({1}) VALUES ({2});'.format(cls.__tablename__, ', '.join(verified),
                                                           ', '.join('?' for _ in verified))
        c.execute(sql, tuple(verified.values()))

    @classmethod
    def drop(cls):
        return f'DROP TABLE IF EXISTS {cls.__tablename__}'

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

from phasesis.database import Column, Integer, Real, Table, Text


class SweepCell(Table, table_name="sweep_cell"):
    cell_id = Column(Integer, primary_key=True)
    panel_trans = Column(Text, index=True)
    panel_rec = Column(Text, index=True)
    mu_t = Column(Real)
    mu_r_norm = Column(Real)
    eta_a = Column(Real)
    bound_rate = Column(Real)
    fit_l1_trans = Column(Real)
    fit_l1_rec = Column(Real)
    graph_hash = Column(Text, index=True)
    seed = Column(Integer)
    order_trans = Column(Integer)
    order_rec = Column(Integer)
    recovery_axis = Column(Text)
    error = Column(Text)


class PhaseTypeFit(Table, table_name="phase_type_fit"):
    law = Column(Text, primary_key=True)
    phases = Column(Integer)
    digest = Column(Text)
    l1_error = Column(Real)
    log_likelihood = Column(Real)
    iterations = Column(Integer)
    content = Column(Text)


class RunInfo(Table, table_name="run_info"):
    key = Column(Text, primary_key=True)
    value = Column(Text)


def create_tables(conn):
    """
    Creates all the tables in the database.

    Parameters
    ----------
    conn: :class:`sqlite3.Connection`, :class:`sqlite3.Cursor`
        A connection to the database.
    """
    for table in Table.all_tables():
        conn.execute(table.drop())
        conn.executescript(table.create_table())

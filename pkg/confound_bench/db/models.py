"""
db/models.py – SQLAlchemy ORM model for the `calibration` table.

One row per calibrated LMM plim pair, keyed by a fingerprint of the
scenario (without m), the covariate policy and the calibration size.
"""
from sqlalchemy import Column, Float, Integer, String
from sqlalchemy.orm import DeclarativeBase


class Base(DeclarativeBase):
    pass


class CalibrationRecord(Base):
    __tablename__ = "calibration"

    fingerprint = Column(String,  primary_key=True)
    n           = Column(Integer, nullable=False)
    m_cal       = Column(Integer, nullable=False)
    reps_cal    = Column(Integer, nullable=False)
    seed        = Column(String,  nullable=False)   # 64-bit unsigned does not fit SQLite INTEGER
    sigma_de2   = Column(Float,   nullable=False)
    sigma_chie2 = Column(Float,   nullable=False)
    sd_de2      = Column(Float,   nullable=False, default=0.0)
    sd_chie2    = Column(Float,   nullable=False, default=0.0)

    def __repr__(self) -> str:
        return f"<CalibrationRecord {self.fingerprint[:12]} n={self.n} m_cal={self.m_cal}>"

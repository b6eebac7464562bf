//! Bundled name lists, most common first. Umlauts are transliterated
//! (UE, OE, AE) as in many administrative registers.

pub const FIRST_NAMES: &[&str] = &[
    "MICHAEL",
    "ANDREAS",
    "THOMAS",
    "PETER",
    "WOLFGANG",
    "KLAUS",
    "JUERGEN",
    "STEFAN",
    "CHRISTIAN",
    "UWE",
    "MARIA",
    "URSULA",
    "MONIKA",
    "PETRA",
    "ELISABETH",
    "SABINE",
    "RENATE",
    "HELGA",
    "KARIN",
    "BRIGITTE",
    "FRANK",
    "MARKUS",
    "BERND",
    "DIETER",
    "GUENTER",
    "HANS",
    "HORST",
    "MANFRED",
    "MARTIN",
    "MATTHIAS",
    "INGRID",
    "ERIKA",
    "ANDREA",
    "GISELA",
    "CLAUDIA",
    "SUSANNE",
    "GABRIELE",
    "CHRISTA",
    "CHRISTINE",
    "HILDEGARD",
    "HELMUT",
    "WERNER",
    "JOERG",
    "GERHARD",
    "RALF",
    "SVEN",
    "KARL",
    "DIRK",
    "TORSTEN",
    "HEINZ",
    "ANNA",
    "BIRGIT",
    "BARBARA",
    "GERDA",
    "JUTTA",
    "NICOLE",
    "STEFANIE",
    "ILSE",
    "HEIKE",
    "ROSWITHA",
    "ALEXANDER",
    "DANIEL",
    "JAN",
    "TOBIAS",
    "FLORIAN",
    "SEBASTIAN",
    "PATRICK",
    "OLIVER",
    "DENNIS",
    "LUKAS",
    "JULIA",
    "KATHARINA",
    "LAURA",
    "SARAH",
    "LISA",
    "ANJA",
    "SANDRA",
    "MELANIE",
    "KERSTIN",
    "TANJA",
    "ROLF",
    "KURT",
    "WALTER",
    "FRIEDRICH",
    "HERBERT",
    "ERNST",
    "OTTO",
    "WILHELM",
    "PAUL",
    "HERMANN",
    "EMMA",
    "LEONIE",
    "HANNAH",
    "MIA",
    "LENA",
    "SOPHIE",
    "MARIE",
    "JOHANNA",
    "CHARLOTTE",
    "AMELIE",
    "JONAS",
    "LEON",
    "FINN",
    "ELIAS",
    "NOAH",
    "BEN",
    "LUCA",
    "FELIX",
    "MAXIMILIAN",
    "MORITZ",
    "EVA",
    "MARTINA",
    "ANGELIKA",
    "ELKE",
    "DORIS",
    "EDITH",
    "IRMGARD",
    "WALTRAUD",
    "HANNELORE",
    "MARGARETE",
    "GEORG",
    "JOSEF",
    "ALFRED",
    "RUDOLF",
    "ERICH",
    "FRITZ",
    "ARNO",
    "BERNHARD",
    "EGON",
    "VOLKER",
    "SILKE",
    "DANIELA",
    "NADINE",
    "CORINNA",
    "ULRIKE",
    "REGINA",
    "SIMONE",
    "ANTJE",
    "BETTINA",
    "CORNELIA",
    "HOLGER",
    "INGO",
    "KAI",
    "LARS",
    "MARCO",
    "NILS",
    "OLAF",
    "RENE",
    "SASCHA",
    "TIM",
    "AGNES",
    "BERTA",
    "CLARA",
    "DOROTHEA",
    "ELFRIEDE",
    "FRIEDA",
    "GERTRUD",
    "HEDWIG",
    "IRENE",
    "LUISE",
    "ACHIM",
    "BENNO",
    "CARSTEN",
    "DETLEF",
    "EBERHARD",
    "FALK",
    "GERD",
    "HARALD",
    "IGOR",
    "JENS",
    "VERA",
    "WIEBKE",
    "YVONNE",
    "ZOE",
    "ALINA",
    "BIANCA",
    "CAROLIN",
    "DIANA",
    "ESTHER",
    "FRANZISKA",
    "KONRAD",
    "LOTHAR",
    "MATHIS",
    "NORBERT",
    "OSKAR",
    "PHILIPP",
    "QUIRIN",
    "REINHARD",
    "SIEGFRIED",
    "THEO",
    "GRETA",
    "HELENE",
    "INES",
    "JANA",
    "KLARA",
    "LOTTE",
    "MAGDALENA",
    "NINA",
    "OLGA",
    "PAULA",
];

pub const LAST_NAMES: &[&str] = &[
    "MUELLER",
    "SCHMIDT",
    "SCHNEIDER",
    "FISCHER",
    "WEBER",
    "MEYER",
    "WAGNER",
    "BECKER",
    "SCHULZ",
    "HOFFMANN",
    "SCHAEFER",
    "KOCH",
    "BAUER",
    "RICHTER",
    "KLEIN",
    "WOLF",
    "SCHROEDER",
    "NEUMANN",
    "SCHWARZ",
    "ZIMMERMANN",
    "BRAUN",
    "KRUEGER",
    "HOFMANN",
    "HARTMANN",
    "LANGE",
    "SCHMITT",
    "WERNER",
    "SCHMITZ",
    "KRAUSE",
    "MEIER",
    "LEHMANN",
    "SCHMID",
    "SCHULZE",
    "MAIER",
    "KOEHLER",
    "HERRMANN",
    "KOENIG",
    "WALTER",
    "MAYER",
    "HUBER",
    "KAISER",
    "FUCHS",
    "PETERS",
    "LANG",
    "SCHOLZ",
    "MOELLER",
    "WEISS",
    "JUNG",
    "HAHN",
    "SCHUBERT",
    "VOGEL",
    "FRIEDRICH",
    "KELLER",
    "GUENTHER",
    "FRANK",
    "BERGER",
    "WINKLER",
    "ROTH",
    "BECK",
    "LORENZ",
    "BAUMANN",
    "FRANKE",
    "ALBRECHT",
    "SCHUSTER",
    "SIMON",
    "LUDWIG",
    "BOEHM",
    "WINTER",
    "KRAUS",
    "MARTIN",
    "SCHUMACHER",
    "KRAEMER",
    "VOGT",
    "STEIN",
    "JAEGER",
    "OTTO",
    "SOMMER",
    "GROSS",
    "SEIDEL",
    "HEINRICH",
    "BRANDT",
    "HAAS",
    "SCHREIBER",
    "GRAF",
    "SCHULTE",
    "DIETRICH",
    "ZIEGLER",
    "KUHN",
    "KUEHN",
    "POHL",
    "ENGEL",
    "HORN",
    "BUSCH",
    "BERGMANN",
    "THOMAS",
    "VOIGT",
    "SAUER",
    "ARNOLD",
    "WOLFF",
    "PFEIFFER",
    "ADLER",
    "BACH",
    "CONRAD",
    "DOERR",
    "EBERT",
    "FEHR",
    "GOETZ",
    "HAUSER",
    "ISELE",
    "JANSEN",
    "KNOBLOCH",
    "LINDNER",
    "MERTENS",
    "NAGEL",
    "OBERMAIER",
    "PAULSEN",
    "QUANDT",
    "RIEDEL",
    "STRAUSS",
    "TRAUTMANN",
    "ULBRICH",
    "VETTER",
    "WEIGEL",
    "XANDER",
    "YILMAZ",
    "ZELLER",
    "ANGERER",
    "BUCHHOLZ",
    "DAHLKE",
    "EICHHORN",
    "FALKENBERG",
    "GRUBER",
    "HEILMANN",
    "ILLNER",
    "JOST",
    "KIRCHNER",
    "LEITNER",
    "MOSER",
    "NOWAK",
    "OSTERTAG",
    "PRINZ",
    "RAUCH",
    "STOLZ",
    "TESCH",
    "UNGER",
    "WAGENKNECHT",
    "WITTMANN",
    "ZEISS",
    "BOCK",
    "DREXLER",
];
